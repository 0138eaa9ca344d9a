#include "commands.hpp"

#include "rmtspca/biwhiten.hpp"
#include "rmtspca/error.hpp"
#include "rmtspca/eval.hpp"
#include "rmtspca/io.hpp"
#include "rmtspca/preprocess.hpp"
#include "rmtspca/rmt.hpp"
#include "rmtspca/spca.hpp"
#include "rmtspca/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>

namespace rmtspca::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json vec(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

fs::path out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output_dir);
  return fs::path(cfg.output_dir) / name;
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw Error(Errc::PreconditionViolation, "cli", flag + " is required");
}

struct Loaded {
  DataMatrix data;
  std::vector<std::string> names;
};

Loaded load(const RunConfig& cfg, Stage stage) {
  require(cfg.input, "--input");
  io::LabeledMatrix m = io::read_matrix(cfg.input, io::parse_format(cfg.format));
  return {DataMatrix(std::move(m.values), stage), std::move(m.column_names)};
}

std::vector<std::string> numbered(const std::string& prefix, Index k) {
  std::vector<std::string> out;
  for (Index j = 0; j < k; ++j) out.push_back(prefix + std::to_string(j + 1));
  return out;
}

double median(Vector v) {
  std::sort(v.data(), v.data() + v.size());
  const Index n = v.size();
  return n % 2 == 1 ? v(n / 2) : 0.5 * (v(n / 2 - 1) + v(n / 2));
}

json ks_json(const rmt::KsResult& ks) {
  return {{"distance", ks.distance}, {"pvalue", ks.pvalue}, {"bulk_count", ks.bulk_count}};
}

// ---------------------------------------------------------------------------

struct Preprocessed {
  DataMatrix data;
  std::vector<std::string> names;
  json report;
};

Preprocessed do_preprocess(const RunConfig& cfg, const Loaded& raw) {
  const DataMatrix& x = raw.data;
  const double target = cfg.target_sum.value_or(median(x.values().rowwise().sum()));
  DataMatrix y = preprocess::log1p_transform(preprocess::library_size_normalize(x, target));
  std::vector<std::string> names = raw.names;
  json report = {{"n", x.n()}, {"p_in", x.p()}, {"target_sum", target}};
  if (cfg.hvg) {
    const std::vector<Index> keep = preprocess::select_hvg(y, *cfg.hvg);
    std::vector<std::string> kept;
    for (Index j : keep) kept.push_back(names[static_cast<std::size_t>(j)]);
    y = preprocess::select_columns(y, keep);
    names = std::move(kept);
  }
  report["p_out"] = y.p();
  report["stage"] = stage_name(y.stage());
  return {std::move(y), std::move(names), std::move(report)};
}

json run_preprocess(const RunConfig& cfg) {
  const Loaded raw = load(cfg, Stage::RawCounts);
  Preprocessed pre = do_preprocess(cfg, raw);
  io::write_delimited(out_path(cfg, "processed.tsv"), pre.data.values(), pre.names);
  return pre.report;
}

// ---------------------------------------------------------------------------

struct Whitened {
  DataMatrix data;
  ScalingPair scaling;
  json report;
};

Whitened do_biwhiten(const RunConfig& cfg, const DataMatrix& x) {
  biwhiten::Options opts;
  opts.tol = cfg.tol;
  opts.max_iter = cfg.max_iter;
  ScalingPair s = biwhiten::sinkhorn_biwhiten(x, opts);
  DataMatrix z = biwhiten::apply_scaling(x, s);
  json report = {{"n", x.n()},
                 {"p", x.p()},
                 {"sigma", s.sigma},
                 {"iterations", s.iterations},
                 {"converged", s.converged},
                 {"last_change", s.last_change},
                 {"residual", s.residual},
                 {"variance_deviation", biwhiten::variance_deviation(z.values())}};
  if (std::min(z.n(), z.p()) >= 10) {
    report["ks"] = ks_json(rmt::ks_distance(rmt::sample_spectrum(z.values())));
    try {
      const DataMatrix g = preprocess::gene_zscore(x);
      report["ks_gene_zscore"] = ks_json(rmt::ks_distance(rmt::sample_spectrum(g.values())));
    } catch (const Error& e) {
      if (e.code() != Errc::ZeroVariance) throw;
    }
  }
  return {std::move(z), std::move(s), std::move(report)};
}

json run_biwhiten(const RunConfig& cfg) {
  const Loaded in = load(cfg, Stage::LogTransformed);
  Whitened w = do_biwhiten(cfg, in.data);
  io::write_delimited(out_path(cfg, "biwhitened.tsv"), w.data.values(), in.names);
  io::write_vector(out_path(cfg, "c.tsv"), w.scaling.c, "c");
  io::write_vector(out_path(cfg, "d.tsv"), w.scaling.d, "d");
  return w.report;
}

// ---------------------------------------------------------------------------

json outlier_json(const rmt::OutlierSet& o, double q) {
  json list = json::array();
  for (Index i = 0; i < o.size(); ++i) {
    const double alpha = rmt::signal_from_outlier(o.lambdas(i), q);
    json item = {{"lambda", o.lambdas(i)}, {"alpha", alpha}};
    item["predicted_overlap"] =
        alpha - 1.0 > std::sqrt(q) ? json(rmt::overlap_prediction(alpha, q)) : json(nullptr);
    list.push_back(item);
  }
  return list;
}

json run_spectrum(const RunConfig& cfg) {
  const Loaded in = load(cfg, Stage::Biwhitened);
  const Matrix& x = in.data.values();
  const rmt::SampleSpectrum s = rmt::sample_spectrum(x);
  const double q = s.q();
  const double margin = cfg.margin.value_or(rmt::default_margin(in.data.n()));
  const double edge = rmt::mp_edge(q).second;
  Index count = 0;
  while (count < s.eigenvalues.size() && s.eigenvalues(count) > edge * (1.0 + margin)) ++count;
  rmt::OutlierSet o = rmt::detect_outliers(s, Matrix::Zero(s.p, count), margin);

  io::write_vector(out_path(cfg, "eigenvalues.tsv"), s.eigenvalues, "eigenvalue");

  if (cfg.grid_points < 2) throw Error(Errc::PreconditionViolation, "cli", "--grid-points must be at least 2");
  const double top = 1.1 * edge;
  const Vector grid = Vector::LinSpaced(cfg.grid_points, top / cfg.grid_points, top);
  const AtomDensity white = AtomDensity::point(1.0);
  const rmt::StieltjesSolution sol = rmt::solve_separable_density(white, white, q, grid, cfg.eta);
  Matrix density(grid.size(), 3);
  for (Index i = 0; i < grid.size(); ++i) {
    density(i, 0) = grid(i);
    density(i, 1) = rmt::mp_density(grid(i), q);
    density(i, 2) = sol.density(i);
  }
  io::write_delimited(out_path(cfg, "density.tsv"), density, {"x", "mp_density", "solver_density"});

  json report = {{"n", s.n},
                 {"p", s.p},
                 {"q", q},
                 {"edge", edge},
                 {"margin", margin},
                 {"eta", sol.eta},
                 {"density_converged", sol.complete()},
                 {"outliers", outlier_json(o, q)}};
  if (s.dimension() >= 10) report["ks"] = ks_json(rmt::ks_distance(s));
  report["overlap_bound"] = o.empty() ? json(nullptr) : json(rmt::rmt_overlap_bound(o, q));
  return report;
}

// ---------------------------------------------------------------------------

spca::SparsePcaConfig spca_config(const RunConfig& cfg) {
  spca::SparsePcaConfig c;
  c.ortho = spca::parse_ortho(cfg.ortho);
  c.tol = cfg.spca_tol;
  c.max_iter = cfg.spca_max_iter;
  return c;
}

json do_spca(const RunConfig& cfg, const DataMatrix& x, const std::vector<std::string>& names) {
  const rmt::SampleSpectrum s = rmt::sample_spectrum(x.values());
  const double margin = cfg.margin.value_or(rmt::default_margin(x.n()));
  const double threshold = rmt::mp_edge(s.q()).second * (1.0 + margin);
  Index count = 0;
  while (count < s.eigenvalues.size() && s.eigenvalues(count) > threshold) ++count;

  const spca::SparsePcaConfig base = spca_config(cfg);
  const spca::SolverRegistry registry = spca::SolverRegistry::with_builtins();
  const spca::SparsePcaSolver solver = registry.make(cfg.solver, base);
  json report = {{"n", x.n()}, {"p", x.p()}, {"margin", margin}, {"outlier_count", count}};

  Matrix loadings;
  if (cfg.penalty) {
    const Index k = cfg.k ? static_cast<Index>(*cfg.k) : count;
    if (k < 1) throw Error(Errc::EmptyOutliers, "cli", "no outliers found and --k not given");
    const Matrix cov = spca::covariance(x.values());
    const Matrix v0 = spca::top_eigenvectors(cov, k);
    loadings = solver(cov, v0, k, *cfg.penalty);
    spca::validate_loadings(loadings, x.p(), k);
    const spca::SparsePcaResult r = spca::summarize(loadings, v0);
    report["k"] = k;
    report["penalty"] = *cfg.penalty;
    report["overlap"] = r.overlap_with_outliers;
    report["sparsity_fraction"] = r.sparsity_fraction;
  } else {
    if (count == 0) throw Error(Errc::EmptyOutliers, "cli", "no outliers above the edge");
    const Index k = cfg.k ? std::min<Index>(static_cast<Index>(*cfg.k), count) : count;
    const Matrix cov = spca::covariance(x.values());
    const Matrix w = spca::top_eigenvectors(cov, k);
    rmt::OutlierSet o;
    o.lambdas = s.eigenvalues.head(k);
    o.vectors = w;
    o.edge = rmt::mp_edge(s.q()).second;
    o.margin = margin;
    spca::SelectOptions opts;
    opts.fraction = cfg.fraction;
    const double bound = rmt::rmt_overlap_bound(o, s.q());
    const spca::GammaSelection g = spca::select_gamma_from_covariance(cov, w, bound, solver, opts);
    loadings = g.result.loadings;
    Matrix scan(static_cast<Index>(g.scan.size()), 2);
    for (std::size_t i = 0; i < g.scan.size(); ++i) {
      scan(static_cast<Index>(i), 0) = g.scan[i].first;
      scan(static_cast<Index>(i), 1) = g.scan[i].second;
    }
    io::write_delimited(out_path(cfg, "scan.tsv"), scan, {"gamma", "overlap"});
    report["k"] = k;
    report["gamma_star"] = g.gamma_star;
    report["gamma_selected"] = g.gamma_selected;
    report["bound"] = g.bound;
    report["slack"] = g.slack;
    report["ceiling"] = g.ceiling;
    report["overlap"] = g.result.overlap_with_outliers;
    report["sparsity_fraction"] = g.result.sparsity_fraction;
    report["bound_never_crossed"] = g.bound_never_crossed;
    report["multiple_crossings"] = g.multiple_crossings;
  }
  io::write_delimited(out_path(cfg, "loadings.tsv"), loadings, numbered("PC", loadings.cols()));
  std::vector<std::string> support;
  for (Index i = 0; i < loadings.rows(); ++i) {
    if (loadings.row(i).cwiseAbs().maxCoeff() > 0.0) support.push_back(names[static_cast<std::size_t>(i)]);
  }
  report["selected_genes"] = support;
  return report;
}

json run_spca(const RunConfig& cfg) {
  const Loaded in = load(cfg, Stage::Biwhitened);
  return do_spca(cfg, in.data, in.names);
}

// ---------------------------------------------------------------------------

json run_synth(const RunConfig& cfg) {
  synth::MixtureParameters params;
  if (cfg.n) params.n = static_cast<Index>(*cfg.n);
  if (cfg.p) params.p = static_cast<Index>(*cfg.p);
  const synth::MixtureVariant variant = synth::parse_mixture_variant(cfg.scenario);
  const synth::SyntheticModel model = synth::mixture_scenario(variant, cfg.seed, params);
  const auto [data, truth] = synth::generate(model);
  io::write_delimited(out_path(cfg, "data.tsv"), data.values(), numbered("gene", data.p()));
  io::write_delimited(out_path(cfg, "signal_basis.tsv"), truth.signal_basis,
                      numbered("u", truth.signal_basis.cols()));

  // Population factor densities of the scenario.
  const AtomDensity rho_a = AtomDensity::empirical(model.a_diag);
  const AtomDensity rho_b = AtomDensity::empirical(model.b_diag);
  const double q = static_cast<double>(model.p) / static_cast<double>(model.n);
  json spikes = json::array();
  for (double alpha : truth.planted_alphas) {
    spikes.push_back({{"alpha", alpha}, {"predicted_outliers", rmt::separable_spike_solve(alpha, rho_a, rho_b, q)}});
  }
  json means = json::array();
  for (double theta : truth.planted_thetas) {
    means.push_back({{"theta", theta}, {"predicted_outliers", rmt::info_plus_noise_solve(theta, rho_a, rho_b, q)}});
  }
  json out = {{"n", model.n},           {"p", model.p},
              {"scenario", synth::mixture_variant_name(variant)},
              {"covariance_spikes", spikes}, {"mean_spikes", means}};

  // With A = I every spike eigenvalue of E[S] = B + Q + P^T P / n gives one
  // outlier; this also covers spikes whose directions overlap.
  if (rho_a.size() == 1) {
    const Index r = static_cast<Index>(model.cov_spikes.size() + model.mean_spikes.size());
    Matrix vectors(model.p, r);
    Vector weights(r);
    Index col = 0;
    for (const auto& c : model.cov_spikes) {
      vectors.col(col) = c.u;
      weights(col++) = c.strength;
    }
    for (const auto& m : model.mean_spikes) {
      vectors.col(col) = m.right;
      weights(col++) = m.theta;
    }
    const double top_b = model.b_diag.maxCoeff();
    json population = json::array();
    for (double alpha : synth::lowrank_update_eigenvalues(model.b_diag, vectors, weights)) {
      if (alpha <= top_b) continue;
      population.push_back(
          {{"alpha", alpha}, {"predicted_outliers", rmt::separable_spike_solve(alpha, rho_a, rho_b, q)}});
    }
    out["population_spikes"] = population;
  }
  return out;
}

// ---------------------------------------------------------------------------

eval::Subspace read_subspace(const std::string& path, const std::string& flag) {
  require(path, flag);
  return eval::Subspace::span_of(io::read_matrix(path).values);
}

json run_eval(const RunConfig& cfg) {
  const eval::Subspace a = read_subspace(cfg.loadings, "--loadings");
  const eval::Subspace ref = read_subspace(cfg.reference, "--reference");
  json report = {{"dim", a.dim()},
                 {"reference_dim", ref.dim()},
                 {"principal_angles", eval::principal_angles(a, ref)},
                 {"chordal_distance_sq", eval::chordal_distance_sq(a, ref)},
                 {"overlap", spca::subspace_overlap(a.basis(), ref.basis())}};
  if (!cfg.baseline.empty()) {
    const eval::Subspace base = read_subspace(cfg.baseline, "--baseline");
    report["baseline_chordal_distance_sq"] = eval::chordal_distance_sq(base, ref);
    report["noise_reduction"] = eval::noise_reduction(a, base, ref);
  }
  return report;
}

// ---------------------------------------------------------------------------

json run_pipeline(const RunConfig& cfg) {
  const Loaded raw = load(cfg, Stage::RawCounts);
  Preprocessed pre = do_preprocess(cfg, raw);
  Whitened w = do_biwhiten(cfg, pre.data);
  io::write_delimited(out_path(cfg, "biwhitened.tsv"), w.data.values(), pre.names);
  io::write_vector(out_path(cfg, "c.tsv"), w.scaling.c, "c");
  io::write_vector(out_path(cfg, "d.tsv"), w.scaling.d, "d");
  json report = {{"preprocess", pre.report}, {"biwhiten", w.report}};
  report["spca"] = do_spca(cfg, w.data, pre.names);
  return report;
}

const std::vector<std::string> kIo = {"input", "format", "output-dir"};

std::vector<std::string> keys(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& part : parts) {
    for (const auto& k : part) {
      if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    }
  }
  return out;
}

}  // namespace

const std::vector<Command>& commands() {
  static const std::vector<std::string> pre = {"target-sum", "hvg"};
  static const std::vector<std::string> bw = {"tol", "max-iter"};
  static const std::vector<std::string> sp = {"margin", "k", "penalty", "fraction", "ortho",
                                              "solver", "spca-tol", "spca-max-iter"};
  static const std::vector<Command> list = {
      {"preprocess", "Library-size normalize, log1p and optionally keep highly variable genes",
       keys({kIo, pre}), run_preprocess},
      {"biwhiten", "Scale rows and columns so the noise has unit variance", keys({kIo, bw}),
       run_biwhiten},
      {"spectrum", "Eigenvalues, outliers and the Marchenko-Pastur fit of biwhitened data",
       keys({kIo, {"margin", "eta", "grid-points"}}), run_spectrum},
      {"spca", "Sparse PCA with the penalty chosen from the outlier overlap bound", keys({kIo, sp}),
       run_spca},
      {"synth", "Generate a synthetic spiked data set", keys({{"output-dir", "seed", "scenario", "n", "p"}}),
       run_synth},
      {"eval", "Compare subspaces", keys({{"output-dir", "loadings", "reference", "baseline"}}), run_eval},
      {"pipeline", "preprocess, biwhiten and spca in one go", keys({kIo, pre, bw, sp}), run_pipeline},
  };
  return list;
}

}  // namespace rmtspca::cli
