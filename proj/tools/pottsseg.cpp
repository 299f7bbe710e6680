#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "pottsseg/cme.hpp"
#include "pottsseg/ml.hpp"
#include "pottsseg/observation.hpp"
#include "pottsseg/potts_prior.hpp"
#include "pottsseg/ppm.hpp"

using ordered_json = nlohmann::ordered_json;
using namespace pottsseg;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

const char* branch_name(Branch b) { return b == Branch::ordered ? "ordered" : "disordered"; }

// "start:end:step", end exclusive; the row count is fixed before rounding
std::vector<double> parse_grid(const std::string& spec) {
  double lo = 0, hi = 0, step = 0;
  char tail = 0;
  if (std::sscanf(spec.c_str(), "%lf:%lf:%lf%c", &lo, &hi, &step, &tail) != 3)
    throw std::invalid_argument("grid '" + spec + "' is not start:end:step");
  if (step <= 0 || hi <= lo)
    throw std::invalid_argument("grid '" + spec + "' needs end > start and step > 0");
  const int count = static_cast<int>(std::ceil((hi - lo) / step - 1e-9));
  if (count < 1 || count > 1000000)
    throw std::invalid_argument("grid '" + spec + "' has an unreasonable row count");
  std::vector<double> values(count);
  for (int i = 0; i < count; ++i) values[i] = lo + i * step;
  return values;
}

ColorImage load_image(const std::string& path) {
  try {
    return read_ppm(path);
  } catch (const std::exception& e) {
    throw std::invalid_argument(e.what());
  }
}

Boundary parse_boundary(const std::string& s) {
  if (s == "free") return Boundary::free;
  if (s == "periodic") return Boundary::periodic;
  throw std::invalid_argument("boundary must be free or periodic");
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << body;
}

void emit(const std::string& path, const std::string& body) {
  if (path.empty())
    std::cout << body;
  else
    write_text(path, body);
}

ordered_json theta_json(const GaussianParams& theta) {
  ordered_json j;
  j["means"] = ordered_json::array();
  j["covariances"] = ordered_json::array();
  for (int s = 0; s < theta.q(); ++s) {
    j["means"].push_back({theta.mean[s](0), theta.mean[s](1), theta.mean[s](2)});
    ordered_json c = ordered_json::array();
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) c.push_back(theta.cov[s](r, k));
    j["covariances"].push_back(c);
  }
  return j;
}

ColorImage label_colors(int width, int height, const std::vector<int>& labels,
                        const GaussianParams& theta) {
  ColorImage img{width, height, {}};
  img.pixels.resize(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) img.pixels[i] = theta.mean[labels[i]];
  return img;
}

struct CommonArgs {
  std::string input, out, report, csv;
  int labels = 2;
  std::string boundary = "free";
  double tol = 1e-5;
  int max_outer = 200;
  double damping = 0.0;
  std::uint64_t seed = 0;
};

int cmd_segment(const CommonArgs& a) {
  ColorImage img = load_image(a.input);
  CmeConfig cfg;
  cfg.q = a.labels;
  cfg.boundary = parse_boundary(a.boundary);
  cfg.outer_tol = a.tol;
  cfg.max_outer = a.max_outer;
  cfg.damping = a.damping;
  cfg.seed = a.seed;
  auto rep = run_cme(img, cfg);
  if (!std::isfinite(rep.u_hat) || !std::isfinite(rep.alpha_hat))
    throw std::runtime_error("estimation produced non-finite values");

  if (!a.out.empty()) write_ppm(label_colors(img.width, img.height, rep.labels, rep.theta), a.out);
  if (!a.csv.empty()) {
    std::string csv = "t,u,alpha,u_post,residual\n";
    for (const auto& r : rep.trace)
      csv += std::to_string(r.t) + "," + num(r.u) + "," + num(r.alpha) + "," + num(r.u_post) +
             "," + num(r.residual) + "\n";
    write_text(a.csv, csv);
  }
  ordered_json j;
  j["u_hat"] = rep.u_hat;
  j["alpha_hat"] = rep.alpha_hat;
  j["theta"] = theta_json(rep.theta);
  j["iterations"] = rep.outer_iterations;
  j["converged"] = rep.converged;
  j["config"] = {{"command", "segment"},     {"input", a.input},
                 {"labels", a.labels},       {"boundary", a.boundary},
                 {"tol", a.tol},             {"max_outer", a.max_outer},
                 {"damping", a.damping},     {"seed", a.seed},
                 {"out", a.out},             {"report", a.report},
                 {"csv", a.csv}};
  emit(a.report, j.dump(2) + "\n");
  return 0;
}

int cmd_prior_curve(int labels, const std::string& u_spec, const std::string& csv_path) {
  auto grid = parse_grid(u_spec);
  auto rows = alpha_curve(labels, grid);
  std::string csv = "u,alpha,f\n";
  for (const auto& r : rows)
    csv += num(r.u) + "," + num(r.alpha) + "," + num(r.free_energy) + "\n";
  emit(csv_path, csv);
  return 0;
}

int cmd_free_energy(int labels, const std::string& k_spec, const std::string& csv_path) {
  auto grid = parse_grid(k_spec);
  auto rows = free_energy_curve(labels, grid);
  std::string csv = "K,f,dfdK,u,branch\n";
  for (const auto& r : rows)
    csv += num(r.coupling) + "," + num(r.free_energy) + "," + num(r.dfdK) + "," + num(r.u) + "," +
           branch_name(r.branch) + "\n";
  emit(csv_path, csv);
  return 0;
}

int cmd_transition(int labels, const std::string& bracket, const std::string& report_path) {
  double lo = 0.0, hi = 6.0;
  if (!bracket.empty()) {
    char tail = 0;
    if (std::sscanf(bracket.c_str(), "%lf:%lf%c", &lo, &hi, &tail) != 2)
      throw std::invalid_argument("bracket '" + bracket + "' is not lo:hi");
  }
  auto t = transition_point(labels, lo, hi);
  ordered_json j;
  j["q"] = labels;
  if (t.kind == TransitionKind::first_order) {
    j["K_C"] = t.coupling_c;
    j["kind"] = "first_order";
  } else {
    j["K_C"] = nullptr;
    j["kind"] = "none_detected";
  }
  j["onset_K"] = t.onset_coupling;
  j["config"] = {{"command", "transition"}, {"labels", labels}, {"bracket", bracket}};
  const std::string body = j.dump(2) + "\n";
  std::cout << body;
  if (!report_path.empty()) write_text(report_path, body);
  return 0;
}

int cmd_ml_sweep(const CommonArgs& a, const std::string& k_spec, bool refine) {
  ColorImage img = load_image(a.input);
  MlOptions opts;
  opts.boundary = parse_boundary(a.boundary);
  opts.theta_tol = a.tol;
  opts.theta_max_iter = a.max_outer;
  opts.damping = a.damping;
  opts.seed = a.seed;
  opts.refine = refine;
  auto grid = k_spec.empty() ? default_coupling_grid() : parse_grid(k_spec);
  auto res = ml_sweep(img, a.labels, grid, opts);
  const auto& est = res.estimate;
  if (!std::isfinite(est.loglik_hat)) throw std::runtime_error("sweep produced non-finite values");

  if (!a.csv.empty()) {
    std::string csv = "K,loglik,u_post,u_prior,converged\n";
    for (const auto& r : res.rows)
      csv += num(r.coupling) + "," + num(r.loglik) + "," + num(r.u_post) + "," + num(r.u_prior) +
             "," + (r.converged ? "1" : "0") + "\n";
    write_text(a.csv, csv);
  }
  if (!a.out.empty()) {
    auto labels = est.labels;
    write_ppm(label_colors(img.width, img.height, labels, est.theta), a.out);
  }
  int converged_rows = 0;
  for (const auto& r : res.rows) converged_rows += r.converged;
  ordered_json j;
  j["K_hat"] = est.coupling_hat;
  j["loglik_hat"] = est.loglik_hat;
  j["u_post"] = est.u_post;
  j["u_prior"] = est.u_prior;
  j["stationarity_residual"] = est.stationarity_residual;
  j["slope_left"] = est.slope_left;
  j["slope_right"] = est.slope_right;
  j["kink_detected"] = est.kink_detected;
  j["kink_location"] = est.kink_location;
  j["kink_slope_gap"] = est.kink_slope_gap;
  j["kink_noise_floor"] = est.kink_noise_floor;
  j["theta"] = theta_json(est.theta);
  j["rows"] = static_cast<int>(res.rows.size());
  j["converged_rows"] = converged_rows;
  j["config"] = {{"command", "ml-sweep"},   {"input", a.input},
                 {"labels", a.labels},      {"boundary", a.boundary},
                 {"K", k_spec.empty() ? "default 0..4 step 0.02" : k_spec},
                 {"tol", a.tol},            {"max_outer", a.max_outer},
                 {"damping", a.damping},    {"seed", a.seed},
                 {"refine", refine},        {"out", a.out},
                 {"report", a.report},      {"csv", a.csv}};
  emit(a.report, j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian color-image segmentation with a Potts prior"};
  app.require_subcommand(1);

  CommonArgs seg;
  auto* seg_cmd = app.add_subcommand("segment", "estimate u, alpha, theta and segment an image");
  seg_cmd->add_option("--input", seg.input, "input PPM (P6)")->required();
  seg_cmd->add_option("--labels", seg.labels, "number of labels")->check(CLI::Range(2, 64));
  seg_cmd->add_option("--boundary", seg.boundary, "free|periodic");
  seg_cmd->add_option("--tol", seg.tol, "outer tolerance");
  seg_cmd->add_option("--max-outer", seg.max_outer, "outer iteration cap");
  seg_cmd->add_option("--damping", seg.damping, "message damping in [0,1)");
  seg_cmd->add_option("--seed", seg.seed, "rng seed");
  seg_cmd->add_option("--out", seg.out, "segmentation image path");
  seg_cmd->add_option("--report", seg.report, "JSON report path (default stdout)");
  seg_cmd->add_option("--csv", seg.csv, "trace CSV path");

  int pc_labels = 2;
  std::string pc_u, pc_csv;
  auto* pc_cmd = app.add_subcommand("prior-curve", "coupling vs disagreement curve");
  pc_cmd->add_option("--labels", pc_labels, "number of labels")->check(CLI::Range(2, 64));
  pc_cmd->add_option("--u", pc_u, "disagreement grid start:end:step (end exclusive)")->required();
  pc_cmd->add_option("--csv", pc_csv, "CSV path (default stdout)");

  int fe_labels = 2;
  std::string fe_k, fe_csv;
  auto* fe_cmd = app.add_subcommand("free-energy", "free energy along a coupling grid");
  fe_cmd->add_option("--labels", fe_labels, "number of labels")->check(CLI::Range(2, 64));
  fe_cmd->add_option("--K", fe_k, "coupling grid start:end:step (end exclusive)")->required();
  fe_cmd->add_option("--csv", fe_csv, "CSV path (default stdout)");

  int tr_labels = 2;
  std::string tr_bracket, tr_report;
  auto* tr_cmd = app.add_subcommand("transition", "locate the first-order crossing");
  tr_cmd->add_option("--labels", tr_labels, "number of labels")->check(CLI::Range(2, 64));
  tr_cmd->add_option("--bracket", tr_bracket, "search bracket lo:hi (default 0:6)");
  tr_cmd->add_option("--report", tr_report, "also write the JSON here");

  CommonArgs ml;
  ml.tol = 1e-6;
  std::string ml_k;
  bool ml_refine = true;
  auto* ml_cmd = app.add_subcommand("ml-sweep", "marginal-likelihood curve over couplings");
  ml_cmd->add_option("--input", ml.input, "input PPM (P6)")->required();
  ml_cmd->add_option("--labels", ml.labels, "number of labels")->check(CLI::Range(2, 64));
  ml_cmd->add_option("--boundary", ml.boundary, "free|periodic");
  ml_cmd->add_option("--K", ml_k, "coupling grid start:end:step (end exclusive)");
  ml_cmd->add_option("--tol", ml.tol, "model drift tolerance");
  ml_cmd->add_option("--max-outer", ml.max_outer, "model refit cap per coupling");
  ml_cmd->add_option("--damping", ml.damping, "message damping in [0,1)");
  ml_cmd->add_option("--seed", ml.seed, "rng seed");
  ml_cmd->add_flag("--refine,!--no-refine", ml_refine, "refine around the argmax");
  ml_cmd->add_option("--out", ml.out, "MPM segmentation at the argmax");
  ml_cmd->add_option("--report", ml.report, "estimate JSON path (default stdout)");
  ml_cmd->add_option("--csv", ml.csv, "sweep CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*seg_cmd) return cmd_segment(seg);
    if (*pc_cmd) return cmd_prior_curve(pc_labels, pc_u, pc_csv);
    if (*fe_cmd) return cmd_free_energy(fe_labels, fe_k, fe_csv);
    if (*tr_cmd) return cmd_transition(tr_labels, tr_bracket, tr_report);
    if (*ml_cmd) return cmd_ml_sweep(ml, ml_k, ml_refine);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
