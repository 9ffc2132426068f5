#pragma once

// Command-line front end: argument parsing into a RunConfig and one runner
// per subcommand (generate, factorize, cluster, predict, evaluate, project,
// pipeline). Data goes to files only; diagnostics are the caller's business.

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntftraffic/ntftraffic.hpp"

namespace ntftraffic::cli {

/// Invalid command line; what() is a one-line diagnostic naming the flag.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// --help was requested; what() holds the rendered help text.
struct HelpRequested : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string subcommand;

  // Paths.
  std::string input;
  std::string output;
  std::string model;
  std::string train;
  std::string test;
  std::string labels;
  std::string centroids;
  std::string profiles;
  std::string predictions;
  std::string truth;
  std::string report;
  std::string trace;
  std::string out_dir;

  // generate / pipeline data.
  Index n = 200;
  Index m = 48;
  Index l = 108;
  std::array<double, kArchetypeCount> weights{0.2, 0.2, 0.2, 0.2, 0.2};
  double noise_sd = 0.02;
  std::uint64_t seed = 0;

  // factorize.
  Index rank = kClusteringRank;
  int max_sweeps = 2000;
  double rel_tol = 1e-8;
  int restarts = 1;

  // cluster.
  Index clusters = 3;

  // predict / evaluate.
  Index neighbors = 3;
  double lambda = 1.0;
  Index observed_steps = 5;
  std::string method = "all";
  int max_iters = 5000;
  bool clamp = false;

  // pipeline protocol.
  std::uint64_t split_seed = 0;
  double link_fraction = 0.25;
  Index window_begin = 10;
  Index window_end = 43;
  Index train_size = 89;
};

namespace detail {

inline std::string fmt(double x) { return ntftraffic::detail::format_double(x, 12); }

inline std::string join_weights(const std::array<double, kArchetypeCount>& w) {
  std::string out;
  for (std::size_t a = 0; a < w.size(); ++a) out += (a ? "," : "") + fmt(w[a]);
  return out;
}

inline std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

inline std::ofstream open_csv(const std::string& path) { return ntftraffic::detail::open_output(path); }

inline void write_report_rows(std::ostream& out, const PredictionReport& r) {
  for (std::size_t k = 0; k < r.per_sequence_error.size(); ++k)
    out << to_string(r.method) << ',' << k << ',' << fmt(r.per_sequence_error[k]) << '\n';
}

inline void write_reports(const std::string& path, const std::vector<PredictionReport>& reports) {
  auto out = open_csv(path);
  out << "method,sequence,error\n";
  for (const auto& r : reports) write_report_rows(out, r);
  for (const auto& r : reports) out << "gpe," << to_string(r.method) << ',' << fmt(r.gpe) << '\n';
}

inline std::vector<Method> selected_methods(const std::string& tag) {
  if (tag == "all") return {Method::ntf_knn, Method::historic_average, Method::historic_nn};
  return {*parse_method(tag)};
}

inline GeneratorConfig generator_config(const RunConfig& c) {
  GeneratorConfig g;
  g.n = c.n;
  g.m = c.m;
  g.l = c.l;
  g.archetype_weights = c.weights;
  g.noise_sd = c.noise_sd;
  g.seed = c.seed;
  return g;
}

inline FactorizationOptions factorization_options(const RunConfig& c) {
  FactorizationOptions o;
  o.rank = c.rank;
  o.max_sweeps = c.max_sweeps;
  o.rel_tol = c.rel_tol;
  o.seed = c.seed;
  o.restarts = c.restarts;
  return o;
}

inline CompletionOptions completion_options(const RunConfig& c) {
  CompletionOptions o;
  o.lambda = c.lambda;
  o.K = c.neighbors;
  o.max_iters = c.max_iters;
  o.seed = c.seed;
  return o;
}

inline void write_labels(const std::string& path, const std::vector<Index>& labels) {
  auto out = open_csv(path);
  out << "sequence_index,label\n";
  for (std::size_t k = 0; k < labels.size(); ++k) out << k << ',' << labels[k] << '\n';
}

}  // namespace detail

/// Parses argv-style arguments (without the program name).
inline RunConfig parse_args(const std::vector<std::string>& args) {
  RunConfig c;
  CLI::App app{"Nonnegative tensor factorization for network-level traffic analysis", "ntftraffic"};
  app.require_subcommand(1);
  const CLI::Validator positive(
      [](std::string& v) {
        double x = 0.0;
        return CLI::detail::lexical_cast(v, x) && x > 0.0 ? std::string() : "must be > 0, got " + v;
      },
      "POSITIVE");
  const CLI::Validator nonneg(
      [](std::string& v) {
        double x = 0.0;
        return CLI::detail::lexical_cast(v, x) && x >= 0.0 ? std::string() : "must be >= 0, got " + v;
      },
      "NONNEGATIVE");
  std::string weights_text;

  auto* gen = app.add_subcommand("generate", "Write a synthetic traffic tensor with planted archetypes");
  auto* fac = app.add_subcommand("factorize", "Nonnegative CP factorization of a TNS3 tensor");
  auto* clu = app.add_subcommand("cluster", "Spectral clustering of sequences on a model's Q rows");
  auto* pre = app.add_subcommand("predict", "Predict the unobserved steps of test sequences");
  auto* eva = app.add_subcommand("evaluate", "Score stored predictions against ground truth");
  auto* pro = app.add_subcommand("project", "3D PCA projection of every network-level traffic state");
  auto* pip = app.add_subcommand("pipeline", "generate -> factorize -> benchmark in one run");

  auto add_data = [&](CLI::App* s) {
    s->add_option("--n", c.n, "Links")->check(positive)->capture_default_str();
    s->add_option("--m", c.m, "Time steps per sequence")->check(positive)->capture_default_str();
    s->add_option("--l", c.l, "Sequences")->check(positive)->capture_default_str();
    s->add_option("--weights", weights_text, "Archetype proportions light-I,light-II,heavy-I,heavy-II,unclosed");
    s->add_option("--noise", c.noise_sd, "Per-entry Gaussian noise sd")->check(nonneg)->capture_default_str();
    s->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  };
  auto add_solver = [&](CLI::App* s) {
    s->add_option("--rank", c.rank, "CP rank")->check(positive)->capture_default_str();
    s->add_option("--max-sweeps", c.max_sweeps, "Sweep limit")->check(positive)->capture_default_str();
    s->add_option("--tol", c.rel_tol, "Relative objective change threshold")->check(positive)->capture_default_str();
    s->add_option("--restarts", c.restarts, "Random restarts")->check(positive)->capture_default_str();
  };
  auto add_completion = [&](CLI::App* s) {
    s->add_option("--k", c.neighbors, "Nearest neighbors K")->check(positive)->capture_default_str();
    s->add_option("--lambda", c.lambda, "Neighbor regularization weight")->check(nonneg)->capture_default_str();
    s->add_option("--observed-steps", c.observed_steps, "Leading observed steps m1")->check(positive)->capture_default_str();
    s->add_option("--max-iters", c.max_iters, "Coefficient solver iteration limit")->check(positive)->capture_default_str();
  };

  add_data(gen);
  gen->add_option("--output", c.output, "Output TNS3 tensor")->required();
  gen->add_option("--labels", c.labels, "Output planted labels CSV");

  fac->add_option("--input", c.input, "Input TNS3 tensor")->required()->check(CLI::ExistingFile);
  fac->add_option("--output", c.output, "Output CPM model")->required();
  fac->add_option("--trace", c.trace, "Output per-sweep objective CSV");
  fac->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  add_solver(fac);

  clu->add_option("--model", c.model, "CPM model")->required()->check(CLI::ExistingFile);
  clu->add_option("--input", c.input, "TNS3 tensor the model was fitted on")->required()->check(CLI::ExistingFile);
  clu->add_option("--clusters", c.clusters, "Cluster count")->check(CLI::Range(Index{2}, Index{1} << 40))->capture_default_str();
  clu->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  clu->add_option("--labels", c.labels, "Output labels CSV")->required();
  clu->add_option("--centroids", c.centroids, "Output centroid coefficients CSV");
  clu->add_option("--profiles", c.profiles, "Output prefix for per-cluster profile CSVs");

  pre->add_option("--model", c.model, "CPM model fitted on the training tensor")->required()->check(CLI::ExistingFile);
  pre->add_option("--train", c.train, "Training TNS3 tensor")->required()->check(CLI::ExistingFile);
  pre->add_option("--test", c.test, "Test TNS3 tensor")->required()->check(CLI::ExistingFile);
  pre->add_option("--method", c.method, "ntf_knn, historic_average, historic_nn or all")
      ->check(CLI::IsMember({"ntf_knn", "historic_average", "historic_nn", "all"}))
      ->capture_default_str();
  pre->add_option("--predictions", c.predictions, "Output prefix; writes <prefix>.<method>.tns3")->required();
  pre->add_option("--report", c.report, "Output report CSV")->required();
  pre->add_flag("--clamp", c.clamp, "Clamp exported predictions to [0, 1]");
  pre->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  add_completion(pre);

  eva->add_option("--predictions", c.predictions, "Predictions TNS3")->required()->check(CLI::ExistingFile);
  eva->add_option("--truth", c.truth, "Ground-truth TNS3")->required()->check(CLI::ExistingFile);
  eva->add_option("--observed-steps", c.observed_steps, "Leading observed steps m1")->check(positive)->capture_default_str();
  eva->add_option("--method", c.method, "Method tag for the report")
      ->check(CLI::IsMember({"ntf_knn", "historic_average", "historic_nn"}))
      ->required();
  eva->add_option("--report", c.report, "Output report CSV")->required();

  pro->add_option("--input", c.input, "Input TNS3 tensor")->required()->check(CLI::ExistingFile);
  pro->add_option("--output", c.output, "Output CSV sequence,step,x,y,z")->required();

  add_data(pip);
  add_solver(pip);
  add_completion(pip);
  pip->add_option("--split-seed", c.split_seed, "Train/test split seed")->capture_default_str();
  pip->add_option("--link-fraction", c.link_fraction, "Most congested share of links kept")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  pip->add_option("--window-begin", c.window_begin, "First step of the prediction window")->check(nonneg)->capture_default_str();
  pip->add_option("--window-end", c.window_end, "One past the last step of the window")->check(positive)->capture_default_str();
  pip->add_option("--train-size", c.train_size, "Training sequences")->check(positive)->capture_default_str();
  pip->add_option("--out-dir", c.out_dir, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    // Prediction runs default to the higher rank.
    pip->parse_complete_callback([&] {
      if (pip->count("--rank") == 0) c.rank = kPredictionRank;
    });
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::ostringstream out, err;
    app.exit(e, out, err);
    throw HelpRequested(out.str());
  } catch (const CLI::CallForAllHelp& e) {
    std::ostringstream out, err;
    app.exit(e, out, err);
    throw HelpRequested(out.str());
  } catch (const CLI::ParseError& e) {
    throw UsageError(detail::first_line(e.what()));
  }

  for (auto* s : app.get_subcommands()) c.subcommand = s->get_name();

  if (!weights_text.empty()) {
    std::vector<double> parsed;
    std::stringstream ss(weights_text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        std::size_t used = 0;
        parsed.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw UsageError("--weights: '" + tok + "' is not a number");
      }
    }
    if (parsed.size() != kArchetypeCount)
      throw UsageError("--weights: expected " + std::to_string(kArchetypeCount) + " comma-separated values, got " +
                       std::to_string(parsed.size()));
    std::copy(parsed.begin(), parsed.end(), c.weights.begin());
  }
  if (c.subcommand == "generate" || c.subcommand == "pipeline") {
    try {
      detail::generator_config(c).validate();
    } catch (const ParameterError& e) {
      throw UsageError(std::string("--weights: ") + e.what());
    }
  }
  if (c.subcommand == "pipeline") {
    if (c.train_size >= c.l) throw UsageError("--train-size: must be smaller than --l (" + std::to_string(c.l) + ")");
    if (c.window_end > c.m) throw UsageError("--window-end: exceeds --m (" + std::to_string(c.m) + ")");
    if (c.window_begin >= c.window_end) throw UsageError("--window-begin: must be below --window-end");
    if (c.observed_steps >= c.window_end - c.window_begin)
      throw UsageError("--observed-steps: must be shorter than the window");
    if (c.neighbors > c.train_size) throw UsageError("--k: exceeds --train-size");
    if (c.link_fraction <= 0.0) throw UsageError("--link-fraction: must be > 0");
  }
  return c;
}

inline RunConfig parse_args(int argc, const char* const* argv) {
  return parse_args(std::vector<std::string>(argv + 1, argv + argc));
}

/// Human-readable dump of the fields relevant to the subcommand.
inline std::string describe(const RunConfig& c) {
  std::ostringstream o;
  o << "subcommand=" << c.subcommand;
  if (c.subcommand == "generate" || c.subcommand == "pipeline")
    o << " n=" << c.n << " m=" << c.m << " l=" << c.l << " weights=" << detail::join_weights(c.weights)
      << " noise=" << detail::fmt(c.noise_sd) << " seed=" << c.seed;
  if (c.subcommand == "factorize" || c.subcommand == "pipeline")
    o << " rank=" << c.rank << " max_sweeps=" << c.max_sweeps << " tol=" << detail::fmt(c.rel_tol)
      << " restarts=" << c.restarts;
  if (c.subcommand == "cluster") o << " clusters=" << c.clusters << " seed=" << c.seed;
  if (c.subcommand == "predict" || c.subcommand == "pipeline")
    o << " k=" << c.neighbors << " lambda=" << detail::fmt(c.lambda) << " observed_steps=" << c.observed_steps;
  if (c.subcommand == "predict" || c.subcommand == "evaluate") o << " method=" << c.method;
  if (c.subcommand == "pipeline")
    o << " split_seed=" << c.split_seed << " link_fraction=" << detail::fmt(c.link_fraction)
      << " window=" << c.window_begin << ":" << c.window_end << " train_size=" << c.train_size;
  return o.str();
}

inline void run_generate(const RunConfig& c) {
  const auto [tensor, labels] = generate(detail::generator_config(c));
  write_tns3(tensor.dense(), c.output);
  if (!c.labels.empty()) {
    auto out = detail::open_csv(c.labels);
    out << "sequence_index,archetype\n";
    for (std::size_t k = 0; k < labels.size(); ++k) out << k << ',' << labels[k] << '\n';
  }
}

inline void run_factorize(const RunConfig& c) {
  const TrafficTensor t = read_tns3(c.input);
  const auto [model, report] = ntf_decompose(t, detail::factorization_options(c));
  write_cpm(model, c.output);
  if (!c.trace.empty()) {
    auto out = detail::open_csv(c.trace);
    out << "sweep,objective\n";
    for (std::size_t s = 0; s < report.objective_trace.size(); ++s)
      out << s + 1 << ',' << ntftraffic::detail::format_double(report.objective_trace[s], 17) << '\n';
  }
}

inline void run_cluster(const RunConfig& c) {
  const CPModel model = read_cpm(c.model);
  model.check_consistent();
  const TrafficTensor t = read_tns3(c.input);
  if (model.l() != t.l()) throw ShapeError("model has " + std::to_string(model.l()) + " sequences, tensor " + std::to_string(t.l()));
  const ClusterAssignment a = spectral_cluster(model.Q, c.clusters, c.seed);
  detail::write_labels(c.labels, a.labels);
  if (!c.centroids.empty()) {
    auto out = detail::open_csv(c.centroids);
    out << "cluster,medoid_sequence";
    for (Index i = 0; i < model.rank(); ++i) out << ",coeff_" << i;
    out << '\n';
    for (Index k = 0; k < a.k; ++k) {
      out << k << ',' << a.medoid_index[k];
      for (Index i = 0; i < model.rank(); ++i) out << ',' << detail::fmt(a.centroid_coeffs(k, i));
      out << '\n';
    }
  }
  if (!c.profiles.empty()) {
    const auto profiles = cluster_profiles(t, a);
    for (std::size_t k = 0; k < profiles.size(); ++k) {
      auto out = detail::open_csv(c.profiles + "_cluster" + std::to_string(k) + ".csv");
      out << "time_step,mean_index\n";
      for (Index j = 0; j < profiles[k].size(); ++j) out << j << ',' << detail::fmt(profiles[k](j)) << '\n';
    }
  }
}

inline void run_predict(const RunConfig& c) {
  const CPModel model = read_cpm(c.model);
  model.check_consistent();
  const TrafficTensor train = read_tns3(c.train);
  const TrafficTensor test = read_tns3(c.test);
  if (model.n() != train.n() || model.m() != train.m() || model.l() != train.l())
    throw ShapeError("model does not match the training tensor");
  if (test.n() != train.n() || test.m() != train.m()) throw ShapeError("test slices do not match training slices");
  if (c.observed_steps >= train.m()) throw UsageError("--observed-steps: must leave at least one step to predict");
  if (c.neighbors > train.l()) throw UsageError("--k: exceeds the number of training sequences");
  const auto mask = ObservationMask::leading_columns(train.n(), train.m(), c.observed_steps);
  const auto opts = detail::completion_options(c);
  std::vector<PredictionReport> reports;
  for (Method method : detail::selected_methods(c.method)) {
    const auto preds = predict_all(train, test, mask, model, method, opts);
    reports.push_back(evaluate(preds, test, mask, method));
    DenseTensor3 out(test.n(), test.m(), test.l());
    for (Index k = 0; k < test.l(); ++k) {
      out.slice_view(k) = preds[k];
      if (c.clamp) out.slice_view(k) = out.slice_view(k).cwiseMax(0.0).cwiseMin(1.0);
    }
    write_tns3(out, c.predictions + "." + std::string(to_string(method)) + ".tns3");
  }
  detail::write_reports(c.report, reports);
}

inline void run_evaluate(const RunConfig& c) {
  const DenseTensor3 preds_t = read_tns3_unbounded(c.predictions);
  const TrafficTensor truth = read_tns3(c.truth);
  if (preds_t.n() != truth.n() || preds_t.m() != truth.m() || preds_t.l() != truth.l())
    throw ShapeError("predictions do not match the truth tensor");
  if (c.observed_steps >= truth.m()) throw UsageError("--observed-steps: must leave at least one step to score");
  const auto mask = ObservationMask::leading_columns(truth.n(), truth.m(), c.observed_steps);
  std::vector<SliceMatrix> preds;
  for (Index k = 0; k < preds_t.l(); ++k) preds.push_back(preds_t.slice_view(k));
  detail::write_reports(c.report, {evaluate(preds, truth, mask, *parse_method(c.method))});
}

inline void run_project(const RunConfig& c) {
  const TrafficTensor t = read_tns3(c.input);
  const Matrix coords = pca_project_3d(t.unfolding());
  auto out = detail::open_csv(c.output);
  out << "sequence,step,x,y,z\n";
  for (Index k = 0; k < t.l(); ++k)
    for (Index j = 0; j < t.m(); ++j) {
      const Index row = j + t.m() * k;
      out << k << ',' << j << ',' << detail::fmt(coords(row, 0)) << ',' << detail::fmt(coords(row, 1)) << ','
          << detail::fmt(coords(row, 2)) << '\n';
    }
}

inline void run_pipeline(const RunConfig& c) {
  namespace fs = std::filesystem;
  fs::create_directories(c.out_dir);
  const fs::path dir(c.out_dir);
  const auto [tensor, labels] = generate(detail::generator_config(c));
  write_tns3(tensor.dense(), (dir / "tensor.tns3").string());
  {
    auto out = detail::open_csv((dir / "labels.csv").string());
    out << "sequence_index,archetype\n";
    for (std::size_t k = 0; k < labels.size(); ++k) out << k << ',' << labels[k] << '\n';
  }
  BenchmarkProtocol protocol;
  protocol.train_size = c.train_size;
  protocol.link_fraction = c.link_fraction;
  protocol.window_begin = c.window_begin;
  protocol.window_end = c.window_end;
  protocol.observed_steps = c.observed_steps;
  protocol.factorization = detail::factorization_options(c);
  const BenchmarkResult result = run_benchmark(tensor, c.split_seed, detail::completion_options(c), protocol);
  write_cpm(result.model, (dir / "model.cpm").string());
  detail::write_reports((dir / "report.csv").string(), result.reports);
  auto out = detail::open_csv((dir / "ksweep.csv").string());
  out << "k,gpe\n";
  for (const auto& [K, gpe] : result.k_sweep) out << K << ',' << detail::fmt(gpe) << '\n';
}

inline void run(const RunConfig& c) {
  if (c.subcommand == "generate") return run_generate(c);
  if (c.subcommand == "factorize") return run_factorize(c);
  if (c.subcommand == "cluster") return run_cluster(c);
  if (c.subcommand == "predict") return run_predict(c);
  if (c.subcommand == "evaluate") return run_evaluate(c);
  if (c.subcommand == "project") return run_project(c);
  if (c.subcommand == "pipeline") return run_pipeline(c);
  throw UsageError("unknown subcommand '" + c.subcommand + "'");
}

}  // namespace ntftraffic::cli
