#include "cli.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

namespace hcstokes::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const char* pattern_name(SplitPattern p) {
  switch (p) {
    case SplitPattern::OddCore: return "odd";
    case SplitPattern::EvenCore: return "even";
    case SplitPattern::BlockLocal: return "block";
  }
  return "?";
}

std::string numbered_path(const std::string& path, int n, bool many) {
  if (!many) return path;
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  const std::string tag = "_N" + std::to_string(n);
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + tag;
  return path.substr(0, dot) + tag + path.substr(dot);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

struct Row {
  Json json;
  bool converged = true;
};

/// Runs `make` for every N, `jobs` rows at a time. Solver failures mark the
/// row; anything else aborts the command.
template <class F>
CommandResult run_rows(const RunConfig& config, const char* command, F make) {
  const DomainSpec spec = resolve_domain(config);
  for (int n : config.n) per_block(spec, n);
  const int count = static_cast<int>(config.n.size());
  std::vector<Row> rows(count);
  std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for num_threads(std::max(1, config.jobs)) schedule(dynamic) if (config.jobs > 1)
  for (int i = 0; i < count; ++i) {
    try {
      rows[i].json = make(spec, config.n[i]);
    } catch (const NonConvergence& e) {
      rows[i] = {Json{{"domain", spec.name}, {"N", config.n[i]}, {"error", e.what()}}, false};
    } catch (const InconsistentSystem& e) {
      rows[i] = {Json{{"domain", spec.name}, {"N", config.n[i]}, {"error", e.what()}}, false};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  CommandResult result;
  result.document = Json{{"schema", 1}, {"command", command}, {"rows", Json::array()}};
  for (auto& r : rows) {
    result.converged = result.converged && r.converged;
    result.document["rows"].push_back(std::move(r.json));
  }
  return result;
}

Json mesh_row(const DomainSpec& spec, int n, const Mesh& mesh) {
  const MeshStats s = mesh_statistics(mesh);
  return Json{{"domain", spec.name},    {"N", n},           {"cells", s.num_cells},
              {"vertices", s.num_vertices}, {"edges", s.num_edges}, {"faces", s.num_faces},
              {"h", s.h},               {"max_diameter", s.max_diameter}, {"min_volume", s.min_volume},
              {"max_volume", s.max_volume}};
}

const char* stability(int k) { return k == 2 ? "unproven" : "proven"; }

void check_manufactured(const RunConfig& config, const DomainSpec& spec) {
  if (config.load != "manufactured") throw std::invalid_argument("unknown load '" + config.load + "'");
  if (spec.name != "cube") throw std::invalid_argument("the manufactured load is defined on the unit cube only");
}

void add_stability_warning(const RunConfig& config, int k, CommandResult& result) {
  if (k == 2)
    result.warnings.push_back("k = 2: discrete inf-sup stability is not established on these meshes (stability: unproven)");
  if (config.pattern == SplitPattern::BlockLocal)
    result.warnings.push_back("pattern 'block' restarts the split per block; the mesh may not be face-conforming");
}

// Plain text table helpers.

struct Table {
  std::vector<std::string> headers;
  std::vector<std::vector<std::string>> rows;

  std::string text() const {
    std::vector<std::size_t> width(headers.size());
    auto cols = [](const std::string& s) {
      std::size_t n = 0;
      for (unsigned char c : s) n += (c & 0xC0) != 0x80;
      return n;
    };
    for (std::size_t j = 0; j < headers.size(); ++j) {
      width[j] = cols(headers[j]);
      for (const auto& r : rows) width[j] = std::max(width[j], cols(r[j]));
    }
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t j = 0; j < cells.size(); ++j) {
        if (j) out << "  ";
        out << std::string(width[j] - cols(cells[j]), ' ') << cells[j];
      }
      out << '\n';
    };
    line(headers);
    for (const auto& r : rows) line(r);
    return out.str();
  }

  std::string markdown() const {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
      out << '|';
      for (const auto& c : cells) out << ' ' << c << " |";
      out << '\n';
    };
    line(headers);
    out << '|';
    for (std::size_t j = 0; j < headers.size(); ++j) out << "---|";
    out << '\n';
    for (const auto& r : rows) line(r);
    return out.str();
  }

  std::string csv(const std::vector<std::string>& ascii_headers) const {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t j = 0; j < cells.size(); ++j) out << (j ? "," : "") << cells[j];
      out << '\n';
    };
    line(ascii_headers);
    for (const auto& r : rows) line(r);
    return out.str();
  }
};

std::string fmt(const Json& v, const char* spec = "%.4g") {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v.get<double>());
  return buf;
}

std::string field(const Json& row, const char* key, const char* spec = "%.4g") {
  return row.contains(key) ? fmt(row[key], spec) : "-";
}

std::string interval(const Json& row, const char* key) {
  if (!row.contains(key) || row[key].is_null()) return "-";
  return "[" + fmt(row[key][0], "%.4f") + ", " + fmt(row[key][1], "%.4f") + "]";
}

struct Layout {
  std::vector<std::string> headers;
  std::vector<std::string> ascii;
  std::vector<std::string> (*cells)(const std::vector<Json>& rows, std::size_t i);
};

Layout layout_for(const std::string& command, bool nc) {
  if (command == "mesh")
    return {{"N", "#Elt", "#Vert", "h", "max diam", "valid"},
            {"N", "cells", "vertices", "h", "max_diameter", "valid"},
            [](const std::vector<Json>& r, std::size_t i) {
              return std::vector<std::string>{field(r[i], "N"), field(r[i], "cells"), field(r[i], "vertices"),
                                              field(r[i], "h"), field(r[i], "max_diameter"),
                                              r[i].value("valid", false) ? "yes" : "no"};
            }};
  if (command == "eig") {
    if (nc)
      return {{"h", "C_h", "λ_{h,1}", "λ̲_{h,1}", "λ̲^{NC}_{h,1}", "C_p interval"},
              {"h", "Ch", "lambda_h1", "lower", "nc_lower", "cp_interval"},
              [](const std::vector<Json>& r, std::size_t i) {
                return std::vector<std::string>{field(r[i], "h"),         field(r[i], "Ch", "%.3g"),
                                                field(r[i], "lambda_h1", "%.5g"), field(r[i], "lower", "%.4g"),
                                                field(r[i], "nc_lower", "%.4g"), interval(r[i], "cp_interval")};
              }};
    return {{"h", "C_h", "λ_{h,1}", "λ̲_{h,1}", "C_p interval"},
            {"h", "Ch", "lambda_h1", "lower", "cp_interval"},
            [](const std::vector<Json>& r, std::size_t i) {
              return std::vector<std::string>{field(r[i], "h"), field(r[i], "Ch", "%.3g"),
                                              field(r[i], "lambda_h1", "%.5g"), field(r[i], "lower", "%.4g"),
                                              interval(r[i], "cp_interval")};
            }};
  }
  if (command == "solve")
    return {{"N", "#Elt", "DOF", "energy", "‖∇u_h − p_h‖", "osc", "bound", "true error"},
            {"N", "cells", "dof", "energy", "radius", "oscillation", "aposteriori", "true_energy_error"},
            [](const std::vector<Json>& r, std::size_t i) {
              return std::vector<std::string>{field(r[i], "N"),      field(r[i], "cells"),
                                              field(r[i], "dof"),    field(r[i], "energy", "%.4e"),
                                              field(r[i], "radius", "%.3e"), field(r[i], "oscillation", "%.3e"),
                                              field(r[i], "aposteriori", "%.3e"),
                                              field(r[i], "true_energy_error", "%.3e")};
            }};
  // certify, kappa and report rows
  return {{"N", "#Elt", "DOF", "κ_h", "C₀ₕ", "C_h", "Order"},
          {"N", "cells", "dof", "kappa_h", "C0h", "Ch", "order"},
          [](const std::vector<Json>& r, std::size_t i) {
            const char* key = r[i].contains("Ch") ? "Ch" : "kappa_h";
            return std::vector<std::string>{field(r[i], "N"),
                                            field(r[i], "cells"),
                                            field(r[i], "dof"),
                                            field(r[i], "kappa_h", "%.3e"),
                                            field(r[i], "C0h", "%.3e"),
                                            field(r[i], "Ch", "%.3e"),
                                            r[i].contains("order") ? fmt(r[i]["order"], "%.2f")
                                                                   : order_column(r, i, key)};
          }};
}

}  // namespace

void apply_config_file(const std::string& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file " + path);
  const Json j = Json::parse(in);
  auto lookup = [&](const char* section, const char* key) -> const Json* {
    const std::string flat = std::string(section) + "." + key;
    if (j.contains(flat)) return &j[flat];
    if (j.contains(section) && j[section].contains(key)) return &j[section][key];
    return nullptr;
  };
  if (auto v = lookup("solver", "tol")) config.solver_tol = v->get<double>();
  if (auto v = lookup("eig", "tol")) config.eig_tol = v->get<double>();
  if (auto v = lookup("eig", "max_iter")) config.eig_max_iter = v->get<int>();
}

void check_config(const RunConfig& c) {
  if (c.k != 2 && c.k != 3) throw std::invalid_argument("k must be 2 or 3");
  if (c.n.empty()) throw std::invalid_argument("no N given");
  for (int n : c.n)
    if (n < 1) throw std::invalid_argument("N must be at least 1");
  if (!(c.solver_tol > 0.0 && c.solver_tol < 1.0)) throw std::invalid_argument("--tol must lie in (0, 1)");
  if (!(c.eig_tol > 0.0 && c.eig_tol < 1.0)) throw std::invalid_argument("--eig-tol must lie in (0, 1)");
  if (c.eig_max_iter < 1) throw std::invalid_argument("eig.max_iter must be positive");
  if (c.osc_order < 1) throw std::invalid_argument("--osc-order must be positive");
  if (c.jobs < 1) throw std::invalid_argument("--jobs must be positive");
}

DomainSpec resolve_domain(const RunConfig& config) {
  if (!config.blocks_file.empty()) {
    DomainSpec spec = load_domain_json(config.blocks_file);
    if (spec.name.empty() || spec.name == "custom") spec.name = config.blocks_file;
    return spec;
  }
  return domain_by_name(config.domain);
}

int per_block(const DomainSpec& spec, int n) {
  const int z = spec.z_extent_blocks();
  if (n < z || n % z != 0)
    throw std::invalid_argument("N = " + std::to_string(n) + " must be a multiple of the domain's z extent (" +
                                std::to_string(z) + " blocks)");
  return n / z;
}

std::string order_column(const std::vector<Json>& rows, std::size_t i, const char* key) {
  if (i == 0 || !rows[i].contains(key) || !rows[i - 1].contains(key)) return "-";
  if (rows[i]["N"].get<int>() != 2 * rows[i - 1]["N"].get<int>()) return "-";
  const double a = rows[i - 1][key].get<double>(), b = rows[i][key].get<double>();
  if (!(a > 0.0 && b > 0.0)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", std::log2(a / b));
  return buf;
}

CommandResult cmd_mesh(const RunConfig& config) {
  const bool many = config.n.size() > 1;
  CommandResult result = run_rows(config, "mesh", [&](const DomainSpec& spec, int n) {
    const auto t0 = Clock::now();
    const Mesh mesh = generate_mesh(spec, per_block(spec, n), config.pattern);
    const ValidationReport v = validate_mesh(mesh);
    Json row = mesh_row(spec, n, mesh);
    row["pattern"] = pattern_name(config.pattern);
    row["valid"] = v.ok();
    row["interior_boundary_faces"] = v.interior_boundary_faces.size();
    row["volume_relative_error"] = v.volume_relative_error;
    if (!config.vtk.empty()) {
      auto out = open_output(numbered_path(config.vtk, n, many));
      write_vtk(mesh, out);
    }
    if (!config.mesh_json.empty()) open_output(numbered_path(config.mesh_json, n, many)) << mesh_to_json(mesh);
    row["timings"] = {{"seconds", seconds_since(t0)}};
    return row;
  });
  if (config.pattern == SplitPattern::BlockLocal)
    result.warnings.push_back("pattern 'block' restarts the split per block; the mesh may not be face-conforming");
  return result;
}

CommandResult cmd_kappa(const RunConfig& config) {
  CommandResult result = run_rows(config, "kappa", [&](const DomainSpec& spec, int n) {
    const auto t0 = Clock::now();
    const Mesh mesh = generate_mesh(spec, per_block(spec, n), config.pattern);
    const KappaResult r =
        compute_kappa(mesh, config.k, {.solver = {.tol = config.solver_tol}, .eig_tol = config.eig_tol,
                                       .eig_max_iter = config.eig_max_iter});
    return Json{{"domain", spec.name},
                {"N", n},
                {"k", config.k},
                {"d", config.k - 1},
                {"m", config.k - 1},
                {"pattern", pattern_name(config.pattern)},
                {"h", mesh.h()},
                {"cells", mesh.num_cells()},
                {"dof", r.flux_system_dim},
                {"kappa_h", r.kappa},
                {"kappa_squared", r.kappa_squared},
                {"identity_defect", r.identity_defect},
                {"eig_residual", r.eig_residual},
                {"applications", r.applications},
                {"load_dof", r.load_dim},
                {"stokes_dof", r.stokes_system_dim},
                {"stability", stability(config.k)},
                {"solver_tols", {{"solver", config.solver_tol}, {"eig", config.eig_tol}}},
                {"timings", {{"seconds", seconds_since(t0)}}}};
  });
  add_stability_warning(config, config.k, result);
  return result;
}

CommandResult cmd_certify(const RunConfig& config) {
  CommandResult result = run_rows(config, "certify", [&](const DomainSpec& spec, int n) {
    const auto t0 = Clock::now();
    const Mesh mesh = generate_mesh(spec, per_block(spec, n), config.pattern);
    const SolverOptions solver{.tol = config.solver_tol};
    const StokesProblem stokes(mesh, config.k, solver);
    const FluxProblem flux(mesh, config.k - 1, solver);
    const KappaResult kappa =
        compute_kappa(stokes, flux, {.solver = solver, .eig_tol = config.eig_tol, .eig_max_iter = config.eig_max_iter});
    const double kappa_seconds = seconds_since(t0);
    const double c0h = compute_C0h(mesh.h());
    const double ch = compute_Ch(kappa.kappa, c0h);

    Json row{{"domain", spec.name},
             {"N", n},
             {"k", config.k},
             {"d", config.k - 1},
             {"m", config.k - 1},
             {"pattern", pattern_name(config.pattern)},
             {"h", mesh.h()},
             {"cells", mesh.num_cells()},
             {"dof", kappa.flux_system_dim},
             {"C0h", c0h},
             {"kappa_h", kappa.kappa},
             {"Ch", ch},
             {"aposteriori", nullptr},
             {"l2_bound", nullptr},
             {"stability", stability(config.k)},
             {"identity_defect", kappa.identity_defect},
             {"solver_tols", {{"solver", config.solver_tol}, {"eig", config.eig_tol}}}};
    if (!config.load.empty()) {
      using M = ManufacturedSolution;
      check_manufactured(config, spec);
      const StokesSolution u = solve_stokes(stokes, M::load, config.osc_order);
      const FieldVector f_h = l2_project(M::load, flux.loads(), config.osc_order);
      const FluxSolution p = reconstruct_flux(flux, f_h);
      const double bound = aposteriori_bound(u, p, M::load, f_h, c0h, config.osc_order);
      row["aposteriori"] = bound;
      row["l2_bound"] = l2_error_bound(ch, bound);
      row["true_energy_error"] = energy_error(M::gradient, u.u, config.osc_order + 2);
      row["load"] = config.load;
      row["osc_order"] = config.osc_order;
    }
    row["timings"] = {{"kappa_seconds", kappa_seconds}, {"seconds", seconds_since(t0)}};
    return row;
  });
  add_stability_warning(config, config.k, result);
  return result;
}

CommandResult cmd_solve(const RunConfig& config) {
  RunConfig c = config;
  if (c.load.empty()) c.load = "manufactured";
  const bool many = c.n.size() > 1;
  CommandResult result = run_rows(c, "solve", [&](const DomainSpec& spec, int n) {
    using M = ManufacturedSolution;
    check_manufactured(c, spec);
    const auto t0 = Clock::now();
    const Mesh mesh = generate_mesh(spec, per_block(spec, n), c.pattern);
    const SolverOptions solver{.tol = c.solver_tol};
    const StokesProblem stokes(mesh, c.k, solver);
    const FluxProblem flux(mesh, c.k - 1, solver);
    if (!c.matrix_market.empty()) {
      auto out = open_output(numbered_path(c.matrix_market, n, many));
      write_matrix_market(stokes.stiffness(), out);
    }
    const StokesSolution u = solve_stokes(stokes, M::load, c.osc_order);
    const FieldVector f_h = l2_project(M::load, flux.loads(), c.osc_order);
    const FluxSolution p = reconstruct_flux(flux, f_h);
    const double radius = hypercircle_radius(u.u, p.p);
    const double osc = l2_error(M::load, f_h, c.osc_order);
    const double c0h = compute_C0h(mesh.h());
    return Json{{"domain", spec.name},
                {"N", n},
                {"k", c.k},
                {"h", mesh.h()},
                {"cells", mesh.num_cells()},
                {"dof", stokes.velocity().dim()},
                {"load", c.load},
                {"energy", u.energy},
                {"load_work", u.load_work},
                {"residual", u.residual},
                {"iterations", u.iterations},
                {"max_divergence_moment", u.max_divergence_moment},
                {"flux_residual", p.equilibration_residual},
                {"radius", radius},
                {"oscillation", osc},
                {"C0h", c0h},
                {"aposteriori", radius + c0h * osc},
                {"true_energy_error", energy_error(M::gradient, u.u, c.osc_order + 2)},
                {"stability", stability(c.k)},
                {"solver_tols", {{"solver", c.solver_tol}}},
                {"timings", {{"seconds", seconds_since(t0)}}}};
  });
  add_stability_warning(c, c.k, result);
  return result;
}

CommandResult cmd_eig(const RunConfig& config) {
  const int k_lambda = config.k_given.value_or(3);
  constexpr int k_ch = 2;
  CommandResult result = run_rows(config, "eig", [&](const DomainSpec& spec, int n) {
    const auto t0 = Clock::now();
    const Mesh mesh = generate_mesh(spec, per_block(spec, n), config.pattern);
    const SolverOptions solver{.tol = config.solver_tol};
    const StokesEigenResult eig = solve_stokes_eigen(mesh, k_lambda, 1, config.eig_tol, config.eig_max_iter, solver);
    const KappaResult kappa =
        compute_kappa(mesh, k_ch, {.solver = solver, .eig_tol = config.eig_tol, .eig_max_iter = config.eig_max_iter});
    const double ch = compute_Ch(kappa.kappa, compute_C0h(mesh.h()));
    const EigenBound bound = make_bound(1, eig.values[0], BoundMethod::ConformingCh, ch);
    Json row{{"domain", spec.name},
             {"N", n},
             {"h", mesh.h()},
             {"pattern", pattern_name(config.pattern)},
             {"k_lambda", k_lambda},
             {"k_Ch", k_ch},
             {"kappa_h", kappa.kappa},
             {"Ch", ch},
             {"lambda_h1", bound.upper},
             {"lower", bound.lower},
             {"cp_interval", *bound.cp_interval},
             {"eig_residual", eig.residuals[0]},
             {"stability", stability(k_ch)}};
    if (config.cr) {
      const StokesEigenResult cr = solve_cr_eigen(mesh, 1, config.eig_tol, config.eig_max_iter, solver);
      const double diameter = mesh_statistics(mesh).max_diameter;
      const EigenBound nc = make_bound(1, cr.values[0], BoundMethod::CrNonconforming, kCrConstant * diameter);
      row["lambda_nc"] = nc.upper;
      row["nc_diameter"] = diameter;
      row["nc_lower"] = nc.lower;
    }
    row["solver_tols"] = {{"solver", config.solver_tol}, {"eig", config.eig_tol}};
    row["timings"] = {{"seconds", seconds_since(t0)}};
    return row;
  });
  result.document["cr"] = config.cr;
  add_stability_warning(config, k_ch, result);
  return result;
}

CommandResult cmd_report(const RunConfig& config) {
  if (config.inputs.empty()) throw std::invalid_argument("report needs at least one input file");
  std::vector<Json> rows;
  std::string source;
  for (const auto& path : config.inputs) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read " + path);
    const Json doc = Json::parse(in);
    if (doc.value("schema", 0) != 1) throw std::invalid_argument(path + ": unsupported schema");
    const std::string command = doc.value("command", "");
    if (command != "certify" && command != "kappa") throw std::invalid_argument(path + ": not a certify or kappa result");
    if (!source.empty() && command != source) throw std::invalid_argument("inputs mix certify and kappa results");
    source = command;
    for (const auto& r : doc["rows"]) rows.push_back(r);
  }
  for (const auto& r : rows) {
    if (r.contains("error")) throw std::invalid_argument("input row N = " + fmt(r["N"]) + " did not converge");
    if (r["domain"] != rows.front()["domain"]) throw std::invalid_argument("inputs mix domains");
    if (r["k"] != rows.front()["k"]) throw std::invalid_argument("inputs mix degrees k");
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Json& a, const Json& b) { return a["N"] < b["N"]; });
  const char* key = source == "certify" ? "Ch" : "kappa_h";
  CommandResult result;
  result.document = Json{{"schema", 1}, {"command", "report"}, {"source", source}, {"rows", Json::array()}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Json r = rows[i];
    const std::string order = order_column(rows, i, key);
    r["order"] = order == "-" ? Json(nullptr) : Json(std::stod(order));
    r.erase("timings");
    result.document["rows"].push_back(std::move(r));
  }
  return result;
}

std::string render(const CommandResult& result, Format format) {
  const Json& doc = result.document;
  if (format == Format::Json) return doc.dump(2) + "\n";
  const std::string command = doc["command"];
  std::vector<Json> rows(doc["rows"].begin(), doc["rows"].end());
  Layout layout = layout_for(command, doc.value("cr", true));
  const bool with_bounds =
      (command == "certify" || command == "report") &&
      std::any_of(rows.begin(), rows.end(), [](const Json& r) { return r.contains("aposteriori") && !r["aposteriori"].is_null(); });
  if (with_bounds) {
    layout.headers.insert(layout.headers.end(), {"a posteriori", "L2 bound", "true error"});
    layout.ascii.insert(layout.ascii.end(), {"aposteriori", "l2_bound", "true_energy_error"});
  }
  Table table{layout.headers, {}};
  std::vector<std::string> failures;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].contains("error")) {
      failures.push_back("N = " + fmt(rows[i]["N"]) + ": " + rows[i]["error"].get<std::string>());
      continue;
    }
    table.rows.push_back(layout.cells(rows, i));
    if (with_bounds)
      for (const char* key : {"aposteriori", "l2_bound", "true_energy_error"})
        table.rows.back().push_back(field(rows[i], key, "%.3e"));
  }
  std::string out;
  if (format == Format::Csv) {
    out = table.csv(layout.ascii);
  } else {
    if (!rows.empty() && rows.front().contains("domain"))
      out = "domain: " + rows.front()["domain"].get<std::string>() + "\n";
    out += command == "report" ? table.markdown() : table.text();
  }
  for (const auto& f : failures) out += "not converged, " + f + "\n";
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Explicit error bounds for Scott-Vogelius Stokes solutions and Stokes eigenvalues on block meshes"};
  app.require_subcommand(1);
  RunConfig config;
  std::string format = "json", pattern = "odd", config_file;
  int k = 2;

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"mesh", "Generate and validate a mesh, print its statistics"},
      {"kappa", "Compute kappa_h"},
      {"certify", "Compute C0h, kappa_h and C_h; with --f also the a posteriori bound"},
      {"solve", "Solve with the manufactured load and evaluate the a posteriori bound"},
      {"eig", "Two-sided bounds for the first Stokes eigenvalue and the Poincare constant"},
      {"report", "Merge certify or kappa JSON results into one table with an Order column"},
  };
  std::vector<CLI::App*> commands;
  std::vector<CLI::Option*> k_opts, tol_opts, eig_tol_opts, max_iter_opts;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    commands.push_back(sub);
    sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "table", "csv"}));
    sub->add_option("--out", config.out, "Write the result here instead of stdout");
    sub->add_option("--config", config_file, "JSON file with solver.tol, eig.tol, eig.max_iter")
        ->check(CLI::ExistingFile);
    if (std::string(s.name) == "report") {
      sub->add_option("inputs", config.inputs, "JSON files written by certify or kappa")->required();
      continue;
    }
    sub->add_option("--domain", config.domain, "cube, lshape or cubeminuscube")
        ->check(CLI::IsMember({"cube", "lshape", "cubeminuscube"}));
    sub->add_option("--blocks", config.blocks_file, "Block list JSON file {\"blocks\": [[i,j,k],...], \"scale\": s}")
        ->check(CLI::ExistingFile);
    sub->add_option("--N", config.n, "Sub-cubes along z; a comma-separated list gives one row each")
        ->delimiter(',');
    sub->add_option("--pattern", pattern, "Split orientation: odd, even or block")
        ->check(CLI::IsMember({"odd", "even", "block"}));
    sub->add_option("--jobs", config.jobs, "Rows computed in parallel");
    if (std::string(s.name) == "mesh") {
      sub->add_option("--vtk", config.vtk, "Write the mesh as legacy VTK");
      sub->add_option("--mesh-json", config.mesh_json, "Write the mesh as JSON");
      continue;
    }
    k_opts.push_back(sub->add_option("--k", k, "Velocity degree (2 or 3)"));
    tol_opts.push_back(sub->add_option("--tol", config.solver_tol, "Relative residual of the saddle solves"));
    eig_tol_opts.push_back(sub->add_option("--eig-tol", config.eig_tol, "Relative eigenpair residual"));
    max_iter_opts.push_back(sub->add_option("--eig-max-iter", config.eig_max_iter, "Lanczos steps"));
    if (std::string(s.name) == "certify" || std::string(s.name) == "solve") {
      sub->add_option("--f", config.load, "Load: manufactured")->check(CLI::IsMember({"manufactured"}));
      sub->add_option("--osc-order", config.osc_order, "Quadrature order for the load and ||f - f_h||");
    }
    if (std::string(s.name) == "solve") sub->add_option("--mtx", config.matrix_market, "Write the stiffness matrix");
    if (std::string(s.name) == "eig") sub->add_flag("--cr,!--no-cr", config.cr, "Include the CR lower bound");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (CLI::App* sub : commands)
    if (sub->parsed()) config.command = sub->get_name();
  if (std::any_of(k_opts.begin(), k_opts.end(), [](CLI::Option* o) { return o->count() > 0; })) config.k_given = k;
  config.k = config.k_given.value_or(config.command == "eig" ? 3 : 2);
  config.format = format == "table" ? Format::Table : format == "csv" ? Format::Csv : Format::Json;
  config.pattern = pattern == "even"    ? SplitPattern::EvenCore
                   : pattern == "block" ? SplitPattern::BlockLocal
                                        : SplitPattern::OddCore;

  try {
    if (!config_file.empty()) {
      RunConfig from_file = config;
      apply_config_file(config_file, from_file);
      auto given = [](const std::vector<CLI::Option*>& opts) {
        return std::any_of(opts.begin(), opts.end(), [](CLI::Option* o) { return o->count() > 0; });
      };
      if (!given(tol_opts)) config.solver_tol = from_file.solver_tol;
      if (!given(eig_tol_opts)) config.eig_tol = from_file.eig_tol;
      if (!given(max_iter_opts)) config.eig_max_iter = from_file.eig_max_iter;
    }
    check_config(config);

    CommandResult result;
    if (config.command == "mesh") result = cmd_mesh(config);
    else if (config.command == "kappa") result = cmd_kappa(config);
    else if (config.command == "certify") result = cmd_certify(config);
    else if (config.command == "solve") result = cmd_solve(config);
    else if (config.command == "eig") result = cmd_eig(config);
    else result = cmd_report(config);

    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    const std::string text = render(result, config.format);
    if (config.out.empty()) std::cout << text;
    else open_output(config.out) << text;
    if (!result.converged) {
      std::cerr << "error: not all quantities converged\n";
      return 2;
    }
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace hcstokes::cli
