#include "barrier_cert.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <map>
#include <thread>

using namespace barrier_cert;
using io::json;

namespace {

enum Exit { kOk = 0, kFailedVerdict = 1, kInputError = 2, kNumericalError = 3 };

/// Wall-clock per stage and counts of what the run produced.
class RunReport {
 public:
  explicit RunReport(std::string command) : command_(std::move(command)) {}

  template <class F>
  auto stage(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
      stages_[name] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    try {
      auto r = f();
      finish();
      return r;
    } catch (...) {
      finish();
      throw;
    }
  }

  void count(const std::string& k, std::uint64_t v) { counts_[k] = v; }
  void verdict(std::string v) { verdict_ = std::move(v); }
  void output(const std::string& path) { outputs_.push_back(path); }

  json to_json() const {
    json j = {{"schema", io::kSchema}, {"command", command_}, {"stages", stages_}, {"counts", counts_}, {"outputs", outputs_}};
    if (!verdict_.empty()) j["verdict"] = verdict_;
    return j;
  }

 private:
  std::string command_;
  std::map<std::string, double> stages_;
  std::map<std::string, std::uint64_t> counts_;
  std::string verdict_;
  std::vector<std::string> outputs_;
};

struct Common {
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::uint64_t seed = 0;
  std::string out;
  std::string report;
  std::string plot;
};

void emit(const json& j, const std::string& path, RunReport& rep) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    io::write_json(path, j);
    rep.output(path);
  }
}

void finish_report(const RunReport& rep, const std::string& path) {
  if (path.empty()) {
    std::cerr << rep.to_json().dump(2) << '\n';
  } else {
    io::write_json(path, rep.to_json());
  }
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::uint64_t lps_since(std::uint64_t before) { return lp_solve_count().load() - before; }

int cmd_bounds(const std::string& net_file, const std::vector<double>& lo, const std::vector<double>& hi,
               const Common& c, RunReport& rep) {
  const auto net = rep.stage("load", [&] { return io::load_network(net_file); });
  if (lo.size() != hi.size() || static_cast<Eigen::Index>(lo.size()) != net.in_dim()) {
    throw InputError("--lo/--hi must both have " + std::to_string(net.in_dim()) + " entries");
  }
  const HyperRectangle box(to_vector(lo), to_vector(hi));
  const BoundMatrix b = rep.stage("crown", [&] { return get_fn_bd(net, box); });
  json rows = json::array();
  for (Eigen::Index i = 0; i < b.rows(); ++i) rows.push_back({b(i, 0), b(i, 1)});
  rep.count("outputs", static_cast<std::uint64_t>(b.rows()));
  emit({{"schema", io::kSchema}, {"box", io::to_json(box)}, {"bounds", rows}}, c.out, rep);
  return kOk;
}

void apply_overrides(ProblemInstance& p, const CLI::App& app, double eps, const std::vector<double>& x0,
                     const std::string& lipschitz) {
  if (app.count("--eps")) p.eps = eps;
  if (app.count("--x0")) p.x0 = to_vector(x0);
  if (app.count("--lipschitz")) {
    if (lipschitz == "auto") {
      p.lipschitz.reset();
    } else {
      try {
        std::size_t used = 0;
        p.lipschitz = std::stod(lipschitz, &used);
        if (used != lipschitz.size()) throw std::invalid_argument(lipschitz);
      } catch (const std::logic_error&) {
        throw InputError("--lipschitz expects a number or \"auto\"");
      }
    }
  }
  p.validate();
}

int cmd_partition(ProblemInstance p, const Common& c, RunReport& rep) {
  const auto before = lp_solve_count().load();
  const auto res = rep.stage("partition", [&] {
    return partition_safe_set(p.safe_set, p.barrier, p.dynamics, {p.eps, c.threads});
  });
  rep.count("partitions", res.boxes.size());
  rep.count("lps_solved", lps_since(before));
  json j = io::to_json(res);
  j["schema"] = io::kSchema;
  emit(j, c.out, rep);
  if (res.boxes.empty()) {
    rep.verdict(to_string(Verdict::FailedSubproblem1));
    return kFailedVerdict;
  }
  return kOk;
}

int cmd_enum(const std::string& barrier_file, const std::vector<double>& x0, const std::string& confine_file,
             const Common& c, RunReport& rep) {
  const auto net = rep.stage("load", [&] { return io::load_shallow(barrier_file); });
  std::vector<HyperRectangle> cells;
  if (!confine_file.empty()) {
    const json j = io::read_json(confine_file);
    const json& arr = j.is_object() && j.contains("boxes") ? j["boxes"] : j;
    if (!arr.is_array()) throw InputError(confine_file + ": expected an array of boxes or {\"boxes\": [...]}");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const auto& b = arr[k];
      // Partition output carries extra per-box fields; keep lo/hi only.
      json lohi = {{"lo", b.value("lo", json())}, {"hi", b.value("hi", json())}};
      cells.push_back(io::box_from_json(lohi, confine_file + ": boxes[" + std::to_string(k) + "]"));
    }
  }
  const auto before = lp_solve_count().load();
  const auto comp = rep.stage("enumerate", [&] {
    return enumerate_sublevel_component(net, to_vector(x0), cells, {c.threads, true, true});
  });
  json j = io::to_json(comp, true, true);
  j["schema"] = io::kSchema;
  std::optional<ContainmentReport> contain;
  if (!cells.empty()) {
    contain = rep.stage("containment", [&] { return check_containment(comp); });
    j["contained"] = contain->contained;
  }
  rep.count("regions", comp.size());
  rep.count("entries", comp.entries.size());
  rep.count("lps_solved", lps_since(before));
  emit(j, c.out, rep);
  if (!c.plot.empty()) {
    HyperRectangle view = cells.empty() ? HyperRectangle::cube(to_vector(x0), 10.0) : bounding_box(cells);
    if (cells.empty()) {
      try {
        view = component_bounding_box(comp).box;
      } catch (const UnboundedComponent&) {
      }
    }
    io::write_json(c.plot, io::plot_data(comp, view));
    rep.output(c.plot);
  }
  return kOk;
}

int cmd_certify(const ProblemInstance& p, const Common& c, RunReport& rep) {
  const auto before = lp_solve_count().load();
  const auto cert = rep.stage("certify", [&] { return certify(p, {c.threads, c.seed}); });
  rep.verdict(to_string(cert.verdict));
  rep.count("partitions", cert.partition.boxes.size());
  rep.count("lps_solved", lps_since(before));
  if (cert.component) rep.count("regions", cert.component->size());
  if (cert.positivity) rep.count("regions_in_c_ball", cert.positivity->regions_enumerated);
  emit(io::to_json(cert), c.out, rep);
  if (!c.plot.empty() && cert.component) {
    std::vector<Region> outside;
    if (cert.positivity) {
      for (const auto& m : cert.positivity->checked) outside.push_back(m.region);
    }
    const HyperRectangle view = cert.c_ball ? *cert.c_ball : p.safe_set;
    io::write_json(c.plot, io::plot_data(*cert.component, view, outside));
    rep.output(c.plot);
  }
  return cert.verdict == Verdict::Certified ? kOk : kFailedVerdict;
}

std::string echo(int argc, char** argv) {
  std::string s;
  for (int k = 0; k < argc; ++k) s += (k ? " " : "") + std::string(argv[k]);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Barrier certificate checker for ReLU dynamics and shallow ReLU barriers"};
  app.require_subcommand(1);
  Common c;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--threads", c.threads, "Worker threads (default: available cores)")->check(CLI::PositiveNumber);
    sub->add_option("--out,-o", c.out, "Write the result JSON here instead of stdout");
    sub->add_option("--report", c.report, "Write the run report here instead of stderr");
  };

  std::string net_file;
  std::vector<double> lo, hi;
  auto* bounds = app.add_subcommand("bounds", "CROWN output bounds of a network over a box");
  bounds->add_option("network", net_file, "Network JSON")->required();
  bounds->add_option("--lo", lo, "Box lower corner")->delimiter(',')->required();
  bounds->add_option("--hi", hi, "Box upper corner")->delimiter(',')->required();
  common(bounds);

  std::string problem_file, lipschitz;
  double eps = 0.0;
  std::vector<double> x0;
  auto problem_opts = [&](CLI::App* sub) {
    sub->add_option("problem", problem_file, "Problem JSON")->required();
    sub->add_option("--eps", eps, "Smallest box width the partition may split");
    sub->add_option("--x0", x0, "Seed point (overrides the problem file)")->delimiter(',');
    sub->add_option("--lipschitz", lipschitz, "Lipschitz estimate for the dynamics, or \"auto\"");
  };
  auto* partition = app.add_subcommand("partition", "Certified decrease set and gamma");
  problem_opts(partition);
  common(partition);

  std::string confine_file;
  auto* enumerate = app.add_subcommand("enum", "Regions of the sub-level component containing x0");
  enumerate->add_option("barrier", net_file, "Barrier network JSON")->required();
  enumerate->add_option("--x0", x0, "Seed point")->delimiter(',')->required();
  enumerate->add_option("--confine", confine_file, "JSON list of boxes (or partition output) to confine to");
  enumerate->add_option("--plot-data", c.plot, "Write region shapes for plotting");
  common(enumerate);

  auto* cert = app.add_subcommand("certify", "Run the whole check");
  problem_opts(cert);
  cert->add_option("--seed", c.seed, "Seed for perturbing a degenerate x0");
  cert->add_option("--plot-data", c.plot, "Write region shapes for plotting");
  common(cert);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  RunReport rep(echo(argc, argv));
  int rc = kOk;
  try {
    if (*bounds) {
      rc = cmd_bounds(net_file, lo, hi, c, rep);
    } else if (*enumerate) {
      rc = cmd_enum(net_file, x0, confine_file, c, rep);
    } else {
      const CLI::App& sub = *partition ? *partition : *cert;
      ProblemInstance p = rep.stage("load", [&] { return io::load_problem(problem_file); });
      apply_overrides(p, sub, eps, x0, lipschitz);
      rc = *partition ? cmd_partition(std::move(p), c, rep) : cmd_certify(p, c, rep);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    rc = kInputError;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    rc = kInputError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    rc = kNumericalError;
  }
  rep.count("exit_code", static_cast<std::uint64_t>(rc));
  finish_report(rep, c.report);
  return rc;
}
