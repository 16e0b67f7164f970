#include "ssnt/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "ssnt/eval.hpp"
#include "ssnt/io.hpp"
#include "ssnt/network.hpp"
#include "ssnt/problems.hpp"
#include "ssnt/solvers.hpp"
#include "ssnt/synth.hpp"
#include "ssnt/tsvd.hpp"

namespace ssnt::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += (c == '\n') ? ' ' : c;
  }
  return out + "\"";
}

int fail(std::ostream& err, ExitCode code, const char* kind, const std::string& message) {
  err << "error code=" << static_cast<int>(code) << " kind=" << kind << " message=" << quote(message) << "\n";
  return code;
}

Dims dims_from(const std::vector<Index>& v) {
  if (v.size() != 3) throw UsageError("--dims expects n1,n2,n3");
  return Dims{v[0], v[1], v[2]};
}

bool within_unit(const std::vector<double>& values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

double peak_for(const Tensor3& truth) {
  const auto values = truth.buffer();
  if (within_unit(values)) return 1.0;
  return *std::max_element(values.begin(), values.end());
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::vector<Index> dims;
  Index rank = 2;
  std::uint64_t seed = 0;
  bool nonlinear = false;
  std::string output;
};

int run_synth(const SynthArgs& a, std::ostream& out) {
  const Dims dims = dims_from(a.dims);
  const Tensor3 x = a.nonlinear ? synth_nonlinear(dims, a.rank, a.seed) : synth_low_tubal_rank(dims, a.rank, a.seed);
  io::write_tensor(a.output, x);
  out << "wrote " << a.output << " dims=" << to_string(dims) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- degrade

struct DegradeArgs {
  std::string input, output, mask_output, kind = "tc";
  SamplingSpec spec;
};

int run_degrade(const DegradeArgs& a, std::ostream& out) {
  const Tensor3 truth = io::read_tensor(a.input);
  const ObservationModel model = degrade(truth, parse_problem_kind(a.kind), a.spec);
  io::write_tensor(a.output, model.measurement);
  if (model.mask) {
    if (a.mask_output.empty()) throw UsageError("--mask-output is required for kind " + a.kind);
    io::write_tensor(a.mask_output, *model.mask);
  }
  out << "wrote " << a.output << "\n";
  return kOk;
}

// ---------------------------------------------------------------- solvers

struct SolveArgs {
  std::string input, mask, truth, output, sparse_output, diagnostics, manifest, accegy;
  std::optional<double> sr;
  double noise_sr = 0.0;
  double sigma = 0.0;
  std::uint64_t sample_seed = 0;
  bool tv = false;
  bool linear = false;
  std::string activation = "leaky_relu";
  std::string regularizer = "lowrank";
  std::vector<Index> layers;
  std::optional<double> lambda, tau, beta, lr, leaky_slope, plateau_tol, peak;
  std::optional<int> tmax, inner_steps;
  std::optional<Index> transformed_dim;
  std::uint64_t seed = 0;
  bool quiet = false;
};

/// Affine map onto [0, 1] estimated from the observed values. Data already
/// inside [0, 1] are left untouched. For SCI only a scale is applied, since
/// a shift does not commute with the snapshot sum unless it is mask-weighted.
struct Scaling {
  io::Normalization norm;
  bool identity = true;
};

Scaling choose_scaling(const ObservationModel& model) {
  Scaling s;
  std::vector<double> values;
  if (model.kind == ProblemKind::SCI) {
    const Tensor3& mask = *model.mask;
    const Index plane = mask.dims().slice_size();
    std::vector<double> coverage(plane, 0.0);
    for (Index k = 0; k < mask.n3(); ++k) {
      for (Index p = 0; p < plane; ++p) coverage[p] += mask[k * plane + p];
    }
    double top = 0.0;
    bool inside = true;
    for (Index p = 0; p < plane; ++p) {
      if (coverage[p] == 0.0) continue;
      const double per_slice = model.measurement[p] / coverage[p];
      top = std::max(top, std::abs(per_slice));
      inside = inside && per_slice >= 0.0 && per_slice <= 1.0;
    }
    if (inside || top == 0.0) return s;
    s.norm = {0.0, top};
    s.identity = false;
    return s;
  }
  for (Index n = 0; n < model.measurement.size(); ++n) {
    if (!model.mask || (*model.mask)[n] == 1.0) values.push_back(model.measurement[n]);
  }
  if (values.empty() || within_unit(values)) return s;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*hi - *lo <= 0.0) return s;
  s.norm = {*lo, *hi};
  s.identity = false;
  return s;
}

ObservationModel normalized(const ObservationModel& model, const Scaling& s) {
  if (s.identity) return model;
  ObservationModel m = model;
  const double span = s.norm.max - s.norm.min;
  for (Index n = 0; n < m.measurement.size(); ++n) {
    double v = (m.measurement[n] - s.norm.min) / span;
    if (m.mask && m.kind != ProblemKind::SCI && (*m.mask)[n] == 0.0) v = 0.0;
    m.measurement[n] = v;
  }
  return m;
}

Tensor3 denormalized(const Tensor3& t, const Scaling& s) {
  if (s.identity) return t;
  Tensor3 out = t;
  const double span = s.norm.max - s.norm.min;
  for (auto& v : out.data()) v = v * span + s.norm.min;
  return out;
}

SolverConfig build_config(const SolveArgs& a, ProblemKind kind, Dims dims) {
  SolverConfig cfg = default_config(kind, dims);
  if (a.lambda) cfg.lambda = *a.lambda;
  if (a.tau) cfg.tau = *a.tau;
  if (a.beta) cfg.beta = *a.beta;
  if (a.lr) cfg.adam.lr = *a.lr;
  if (a.tmax) cfg.t_max = *a.tmax;
  if (a.inner_steps) cfg.inner_steps = *a.inner_steps;
  if (a.transformed_dim) cfg.transformed_dim = *a.transformed_dim;
  if (a.plateau_tol) cfg.plateau_tol = *a.plateau_tol;
  if (!a.layers.empty()) {
    if (a.layers.size() != 2) throw UsageError("--layers expects p,q");
    cfg.p = a.layers[0];
    cfg.q = a.layers[1];
  }
  cfg.activation = a.linear ? ActivationKind::identity() : parse_activation(a.activation);
  if (a.leaky_slope && cfg.activation.kind == ActivationKind::Kind::LeakyReLU) {
    cfg.activation = ActivationKind::leaky_relu(*a.leaky_slope);
  }
  cfg.regularizer = parse_regularizer(a.regularizer);
  cfg.seed = a.seed;
  cfg.validate();
  return cfg;
}

int run_solver(ProblemKind kind, const SolveArgs& a, const std::vector<std::string>& argv, std::ostream& out,
               std::ostream& err) {
  io::RunManifest manifest;
  manifest.started_at = io::utc_timestamp();
  manifest.command = argv.empty() ? "" : argv.front();
  manifest.argv = argv;

  const Tensor3 input = io::read_tensor(a.input);
  ObservationModel model;
  std::optional<Tensor3> truth;
  if (!a.truth.empty()) truth = io::read_tensor(a.truth);

  if (kind == ProblemKind::BS) {
    model.kind = kind;
    model.measurement = input;
  } else if (!a.mask.empty()) {
    model.kind = kind;
    model.mask = io::read_tensor(a.mask);
    model.measurement = input;
    if (kind != ProblemKind::SCI && model.mask->dims() == input.dims()) {
      model.measurement = hadamard(*model.mask, input);
    }
  } else if (a.sr) {
    // The input is a clean tensor: sample it here and score against it.
    model = degrade(input, kind, SamplingSpec{*a.sr, a.noise_sr, a.sigma, a.sample_seed});
    if (!truth) truth = input;
  } else {
    throw UsageError("either --mask or --sr is required");
  }
  model.validate();
  const Dims dims = model.target_dims();
  if (truth && !(truth->dims() == dims)) throw ShapeError("--truth dims differ from the recovered tensor");

  const SolverConfig cfg = build_config(a, kind, dims);
  const Scaling scaling = choose_scaling(model);
  const ObservationModel work = normalized(model, scaling);

  SolveHooks hooks;
  const int every = std::max(1, cfg.t_max / 20);
  if (!a.quiet) {
    hooks.on_iteration = [&](const Diagnostics& d) {
      if (d.iteration % every == 0) {
        err << "iter " << d.iteration << " loss=" << io::format_double(d.loss.total)
            << " rel_w=" << io::format_double(d.rel_err_weights) << "\n";
      }
    };
  }
  const SolveResult res = a.tv ? solve_ssnt_tv(work, cfg, hooks) : solve_ssnt(work, cfg, hooks);

  // Assembly runs on the original scale so that observed entries are copied
  // bit-exactly.
  const Recovery recovery = assemble(denormalized(res.raw, scaling), model);
  io::write_tensor(a.output, recovery.estimate);
  if (!a.sparse_output.empty()) {
    if (!recovery.sparse) throw UsageError("--sparse-output only applies to subtract and robust-complete");
    io::write_tensor(a.sparse_output, *recovery.sparse);
  }

  const std::string diag_path = a.diagnostics.empty() ? a.output + ".diagnostics.csv" : a.diagnostics;
  if (!res.history.empty()) {
    io::export_diagnostics(res.history, diag_path);
    manifest.diagnostics_path = diag_path;
  }
  if (!a.accegy.empty()) io::write_text_atomic(a.accegy, io::accegy_csv(acc_egy(transform(res.input, res.params))));

  if (truth) {
    const double peak = a.peak.value_or(peak_for(*truth));
    manifest.metrics = evaluate_metrics(recovery.estimate, *truth, peak);
    out << io::metrics_csv(*manifest.metrics);
  }
  for (const auto& w : res.warnings) err << "warning: " << w << "\n";

  json snapshot = io::config_to_json(cfg);
  snapshot["problem"] = to_string(kind);
  snapshot["tv"] = a.tv;
  snapshot["input"] = a.input;
  snapshot["mask"] = a.mask;
  snapshot["truth"] = a.truth;
  snapshot["sr"] = a.sr ? json(*a.sr) : json(nullptr);
  snapshot["noise_sr"] = a.noise_sr;
  snapshot["sigma"] = a.sigma;
  snapshot["sample_seed"] = a.sample_seed;
  manifest.config = snapshot;
  manifest.seed = cfg.seed;
  manifest.normalization = scaling.norm;
  manifest.warnings = res.warnings;
  manifest.finished_at = io::utc_timestamp();
  const std::string manifest_path = a.manifest.empty() ? a.output + ".manifest.json" : a.manifest;
  io::write_text_atomic(manifest_path, io::serialize_manifest(manifest));
  return kOk;
}

void add_solver_options(CLI::App* sub, SolveArgs& a) {
  sub->add_option("--input", a.input, "observed tensor, or a clean tensor when --sr is given")->required();
  sub->add_option("--mask", a.mask, "observed-set or sensing mask");
  sub->add_option("--sr", a.sr, "sample the input at this rate instead of reading a mask")
      ->check(CLI::Range(0.0, 1.0));
  sub->add_option("--noise-sr", a.noise_sr, "salt-and-pepper rate within the observed set (with --sr)")
      ->check(CLI::Range(0.0, 1.0));
  sub->add_option("--sigma", a.sigma, "gaussian noise on the snapshot (with --sr)");
  sub->add_option("--sample-seed", a.sample_seed, "seed for --sr sampling");
  sub->add_option("--truth", a.truth, "ground truth for metrics");
  sub->add_option("--output", a.output, "recovered tensor")->required();
  sub->add_option("--sparse-output", a.sparse_output, "sparse component (subtract, robust-complete)");
  sub->add_option("--diagnostics", a.diagnostics, "per-iteration CSV (default <output>.diagnostics.csv)");
  sub->add_option("--manifest", a.manifest, "run manifest (default <output>.manifest.json)");
  sub->add_option("--accegy", a.accegy, "AccEgy CSV of the learned transform");
  sub->add_flag("--tv", a.tv, "TV-regularized ADMM solver");
  sub->add_flag("--linear", a.linear, "identity activations");
  sub->add_option("--activation", a.activation, "identity | relu | leaky_relu[:slope]");
  sub->add_option("--leaky-slope", a.leaky_slope, "LeakyReLU negative slope");
  sub->add_option("--regularizer", a.regularizer, "lowrank | sparse | none");
  sub->add_option("--layers", a.layers, "p,q")->delimiter(',');
  sub->add_option("--transformed-dim", a.transformed_dim, "third-mode width between f and g");
  sub->add_option("--lambda", a.lambda);
  sub->add_option("--tau", a.tau);
  sub->add_option("--beta", a.beta);
  sub->add_option("--tmax", a.tmax);
  sub->add_option("--inner-steps", a.inner_steps);
  sub->add_option("--lr", a.lr);
  sub->add_option("--plateau-tol", a.plateau_tol, "stop early on a loss plateau");
  sub->add_option("--peak", a.peak, "PSNR/SSIM peak value");
  sub->add_option("--seed", a.seed, "network initialization seed");
  sub->add_flag("--quiet", a.quiet);
}

// ---------------------------------------------------------------- metrics / accegy / baseline / convert

struct MetricsArgs {
  std::string estimate, reference, output;
  std::optional<double> peak;
  bool per_slice = false;
};

int run_metrics(const MetricsArgs& a, std::ostream& out) {
  const Tensor3 x = io::read_tensor(a.estimate);
  const Tensor3 ref = io::read_tensor(a.reference);
  const MetricReport r = evaluate_metrics(x, ref, a.peak.value_or(peak_for(ref)), a.per_slice);
  const std::string csv = io::metrics_csv(r);
  out << csv;
  if (!a.output.empty()) io::write_text_atomic(a.output, csv);
  return kOk;
}

struct AccEgyArgs {
  std::string input, output, transform = "identity";
};

int run_accegy(const AccEgyArgs& a, std::ostream& out) {
  const Tensor3 t = io::read_tensor(a.input);
  AccEgyCurve curve;
  if (a.transform == "identity") {
    curve = acc_egy(t);
  } else if (a.transform == "dft") {
    curve = acc_egy(dft_mode3(t));
  } else {
    throw UsageError("--transform must be identity or dft");
  }
  const std::string csv = io::accegy_csv(curve);
  if (a.output.empty()) {
    out << csv;
  } else {
    io::write_text_atomic(a.output, csv);
  }
  return kOk;
}

struct BaselineArgs {
  std::string input, mask, truth, output;
  std::optional<double> sr;
  std::uint64_t sample_seed = 0;
  BaselineOptions opts;
  std::optional<double> peak;
};

int run_baseline(const BaselineArgs& a, std::ostream& out) {
  const Tensor3 input = io::read_tensor(a.input);
  ObservationModel model;
  std::optional<Tensor3> truth;
  if (!a.truth.empty()) truth = io::read_tensor(a.truth);
  if (!a.mask.empty()) {
    model.kind = ProblemKind::TC;
    model.mask = io::read_tensor(a.mask);
    if (!(model.mask->dims() == input.dims())) throw ShapeError("mask dims differ from input");
    model.measurement = hadamard(*model.mask, input);
  } else if (a.sr) {
    model = degrade(input, ProblemKind::TC, SamplingSpec{*a.sr, 0.0, 0.0, a.sample_seed});
    if (!truth) truth = input;
  } else {
    throw UsageError("either --mask or --sr is required");
  }
  const Tensor3 x = tnn_baseline_complete(model, a.opts);
  io::write_tensor(a.output, x);
  if (truth) out << io::metrics_csv(evaluate_metrics(x, *truth, a.peak.value_or(peak_for(*truth))));
  return kOk;
}

struct ConvertArgs {
  std::string input, output;
  std::vector<Index> dims;
};

bool is_csv(const std::string& path) { return fs::path(path).extension() == ".csv"; }

int run_convert(const ConvertArgs& a, std::ostream& out) {
  if (is_csv(a.input) == is_csv(a.output)) throw UsageError("convert needs exactly one .csv side");
  if (is_csv(a.input)) {
    if (a.dims.empty()) throw UsageError("--dims is required when reading csv");
    const auto bytes = io::read_file(a.input);
    io::write_tensor(a.output, io::tensor_from_csv(std::string(bytes.begin(), bytes.end()), dims_from(a.dims)));
  } else {
    const Tensor3 t = io::read_tensor(a.input);
    io::write_text_atomic(a.output, io::tensor_to_csv(t));
    out << "dims=" << t.n1() << "," << t.n2() << "," << t.n3() << "\n";
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-rank tensor recovery with self-supervised nonlinear mode-3 transforms", "ssnt"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic low-tubal-rank tensor");
  synth_cmd->add_option("--dims", synth.dims, "n1,n2,n3")->delimiter(',')->required();
  synth_cmd->add_option("--tubal-rank", synth.rank)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_flag("--nonlinear", synth.nonlinear, "apply a nonlinear mode-3 map to the core");
  synth_cmd->add_option("--output", synth.output)->required();

  DegradeArgs deg;
  auto* degrade_cmd = app.add_subcommand("degrade", "apply an observation model");
  degrade_cmd->add_option("--input", deg.input)->required();
  degrade_cmd->add_option("--kind", deg.kind, "tc | bs | rtc | sci");
  degrade_cmd->add_option("--sr", deg.spec.sr)->check(CLI::Range(0.0, 1.0));
  degrade_cmd->add_option("--noise-sr", deg.spec.noise_sr)->check(CLI::Range(0.0, 1.0));
  degrade_cmd->add_option("--sigma", deg.spec.gauss_sigma);
  degrade_cmd->add_option("--seed", deg.spec.seed);
  degrade_cmd->add_option("--output", deg.output)->required();
  degrade_cmd->add_option("--mask-output", deg.mask_output);

  SolveArgs complete_args, subtract_args, robust_args, sci_args;
  auto* complete_cmd = app.add_subcommand("complete", "tensor completion");
  add_solver_options(complete_cmd, complete_args);
  auto* subtract_cmd = app.add_subcommand("subtract", "background subtraction");
  add_solver_options(subtract_cmd, subtract_args);
  auto* robust_cmd = app.add_subcommand("robust-complete", "robust tensor completion");
  add_solver_options(robust_cmd, robust_args);
  auto* sci_cmd = app.add_subcommand("sci", "snapshot compressive imaging reconstruction");
  add_solver_options(sci_cmd, sci_args);

  MetricsArgs metrics;
  auto* metrics_cmd = app.add_subcommand("metrics", "PSNR, SSIM and SAM of an estimate against a reference");
  metrics_cmd->add_option("estimate", metrics.estimate)->required();
  metrics_cmd->add_option("reference", metrics.reference)->required();
  metrics_cmd->add_option("--peak", metrics.peak);
  metrics_cmd->add_option("--output", metrics.output);

  AccEgyArgs accegy;
  auto* accegy_cmd = app.add_subcommand("accegy", "accumulated singular-value energy of frontal slices");
  accegy_cmd->add_option("--input", accegy.input)->required();
  accegy_cmd->add_option("--transform", accegy.transform, "identity | dft");
  accegy_cmd->add_option("--output", accegy.output);

  BaselineArgs baseline;
  auto* baseline_cmd = app.add_subcommand("baseline-tnn", "DFT-based TNN completion by ADMM");
  baseline_cmd->add_option("--input", baseline.input)->required();
  baseline_cmd->add_option("--mask", baseline.mask);
  baseline_cmd->add_option("--sr", baseline.sr)->check(CLI::Range(0.0, 1.0));
  baseline_cmd->add_option("--sample-seed", baseline.sample_seed);
  baseline_cmd->add_option("--truth", baseline.truth);
  baseline_cmd->add_option("--output", baseline.output)->required();
  baseline_cmd->add_option("--rho", baseline.opts.rho);
  baseline_cmd->add_option("--iters", baseline.opts.iters);
  baseline_cmd->add_option("--growth", baseline.opts.growth);
  baseline_cmd->add_option("--peak", baseline.peak);

  ConvertArgs convert;
  auto* convert_cmd = app.add_subcommand("convert", "convert between the tensor container and flat CSV");
  convert_cmd->add_option("--input", convert.input)->required();
  convert_cmd->add_option("--output", convert.output)->required();
  convert_cmd->add_option("--dims", convert.dims, "n1,n2,n3 (csv input)")->delimiter(',');

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    return fail(err, kUsage, "usage", e.what());
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth, out);
    if (degrade_cmd->parsed()) return run_degrade(deg, out);
    if (complete_cmd->parsed()) return run_solver(ProblemKind::TC, complete_args, args, out, err);
    if (subtract_cmd->parsed()) return run_solver(ProblemKind::BS, subtract_args, args, out, err);
    if (robust_cmd->parsed()) return run_solver(ProblemKind::RTC, robust_args, args, out, err);
    if (sci_cmd->parsed()) return run_solver(ProblemKind::SCI, sci_args, args, out, err);
    if (metrics_cmd->parsed()) return run_metrics(metrics, out);
    if (accegy_cmd->parsed()) return run_accegy(accegy, out);
    if (baseline_cmd->parsed()) return run_baseline(baseline, out);
    if (convert_cmd->parsed()) return run_convert(convert, out);
  } catch (const io::IoError& e) {
    return fail(err, kIo, "io", e.what());
  } catch (const io::FormatError& e) {
    return fail(err, kFormat, "format", e.what());
  } catch (const ShapeError& e) {
    return fail(err, kShape, "shape", e.what());
  } catch (const NumericalError& e) {
    return fail(err, kNumerical, "numerical", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(err, kUsage, "usage", e.what());
  } catch (const std::exception& e) {
    return fail(err, kInternal, "internal", e.what());
  }
  return fail(err, kUsage, "usage", "no subcommand");
}

}  // namespace ssnt::cli
