#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcstokes/eigenbounds.hpp"

namespace hcstokes::cli {

using Json = nlohmann::ordered_json;

enum class Format { Json, Table, Csv };

struct RunConfig {
  std::string command;
  std::string domain = "cube";
  std::string blocks_file;  ///< overrides `domain` when set
  std::vector<int> n{1};    ///< sub-cubes along z, one row each
  int k = 2;
  std::optional<int> k_given;  ///< k as passed on the command line
  SplitPattern pattern = SplitPattern::OddCore;
  double solver_tol = 1e-10;
  double eig_tol = 1e-8;
  int eig_max_iter = 200;
  Format format = Format::Json;
  std::string out;
  std::string vtk;
  std::string mesh_json;
  std::string matrix_market;
  std::string load;  ///< "manufactured" or empty
  int osc_order = 20;
  bool cr = true;
  int jobs = 1;
  std::vector<std::string> inputs;  ///< report inputs
};

/// Reads {"solver": {"tol": ..}, "eig": {"tol": .., "max_iter": ..}} or the
/// same keys flattened ("solver.tol", ...) into `config`.
void apply_config_file(const std::string& path, RunConfig& config);

/// Throws std::invalid_argument on out-of-range values.
void check_config(const RunConfig& config);

DomainSpec resolve_domain(const RunConfig& config);
/// Sub-cubes per block for a row labelled N.
int per_block(const DomainSpec& spec, int n);

struct CommandResult {
  Json document;
  bool converged = true;
  std::vector<std::string> warnings;
};

CommandResult cmd_mesh(const RunConfig& config);
CommandResult cmd_kappa(const RunConfig& config);
CommandResult cmd_certify(const RunConfig& config);
CommandResult cmd_solve(const RunConfig& config);
CommandResult cmd_eig(const RunConfig& config);
CommandResult cmd_report(const RunConfig& config);

/// log2(rows[i-1][key] / rows[i][key]) when row i doubles the N of row i-1,
/// "-" otherwise.
std::string order_column(const std::vector<Json>& rows, std::size_t i, const char* key);

std::string render(const CommandResult& result, Format format);

/// Parses argv, runs the command and writes the output. Returns the exit code.
int run(int argc, char** argv);

}  // namespace hcstokes::cli
