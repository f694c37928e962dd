#include "parapde/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "parapde/errors.hpp"

namespace parapde {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw DataError("write failed for " + path.string());
}

void write_json(const fs::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

// JSON has no inf/nan; such values become null.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string support_labels(const SubsetSolution& s) {
  std::vector<std::size_t> terms = s.shared_support;
  if (s.mode == SupportMode::Free) {
    for (const auto& sup : s.step_supports) terms.insert(terms.end(), sup.begin(), sup.end());
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  }
  std::string out;
  for (std::size_t t : terms) out += (out.empty() ? "" : ";") + term_at(t).label();
  return out;
}

bool has_stage(const DiscoveryResult& r, const std::string& name) {
  return std::find(r.completed_stages.begin(), r.completed_stages.end(), name) != r.completed_stages.end();
}

}  // namespace

void write_scores_csv(const fs::path& path, const DiscoveryResult& r, const std::vector<CriterionScore>& scores) {
  if (scores.size() != r.path.solutions.size() || r.psd_scores.size() != scores.size() ||
      r.identity_scores.size() != scores.size())
    throw DataError("scores table: size mismatch with the subset path");
  auto out = open_out(path);
  out << "support_size,terms,rss_raw,rss_psd,aic,aicc,aicc_undefined,bic,ubic,V,V_bar,U,"
         "aic_identity,aicc_identity,bic_identity\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const CriterionScore& s = scores[i];
    const CriterionScore& id = r.identity_scores[i];
    out << s.support_size << ',' << support_labels(r.path.solutions[i]) << ',' << format_double(id.rss) << ','
        << format_double(r.psd_scores[i].rss) << ',' << format_double(s.aic) << ',' << format_double(s.aicc) << ','
        << (s.aicc_undefined ? 1 : 0) << ',' << format_double(s.bic) << ',' << format_double(s.ubic) << ','
        << format_double(s.V) << ',' << format_double(s.V_bar) << ',' << format_double(s.uncertainty) << ','
        << format_double(id.aic) << ',' << format_double(id.aicc) << ',' << format_double(id.bic) << '\n';
  }
  finish(out, path);
}

void write_filter_csv(const fs::path& path, const DiscoveryResult& r) {
  const FilterReport& f = r.selection.filter;
  auto out = open_out(path);
  out << "support_size,global_bic,p_next,reference_size,p_reference,p_cut,significant";
  for (Eigen::Index j = 0; j < f.per_step_bic.cols(); ++j) out << ",bic_step_" << j;
  out << '\n';
  for (std::size_t k = 0; k < f.sizes.size(); ++k) {
    const bool sig = std::find(f.significant_sizes.begin(), f.significant_sizes.end(), f.sizes[k]) !=
                     f.significant_sizes.end();
    out << f.sizes[k] << ',' << format_double(f.global_bic[k]) << ','
        << (k < f.consecutive_p.size() ? format_double(f.consecutive_p[k]) : "") << ',' << f.reference_size[k]
        << ',' << (k < f.reference_p.size() ? format_double(f.reference_p[k]) : "") << ','
        << format_double(f.p_cut) << ',' << (sig ? 1 : 0);
    for (Eigen::Index j = 0; j < f.per_step_bic.cols(); ++j)
      out << ',' << format_double(f.per_step_bic(static_cast<Eigen::Index>(k), j));
    out << '\n';
  }
  finish(out, path);
}

void write_selection_json(const fs::path& path, const DiscoveryResult& r, const std::vector<double>& grid) {
  const SelectionReport& s = r.selection;
  Json j;
  j["selected_size"] = s.selected_size;
  j["lambda_star"] = s.lambda.lambda_star;
  j["lambda_unstable"] = s.lambda.unstable;
  j["terms"] = r.selected_terms();
  j["labels"] = r.selected_labels();
  j["significant_sizes"] = s.filter.significant_sizes;
  j["p_cut"] = number(s.filter.p_cut);
  Json per_lambda = Json::array();
  for (std::size_t i = 0; i < s.lambda.argmin_per_lambda.size() && i < grid.size(); ++i)
    per_lambda.push_back({{"lambda", grid[i]}, {"argmin_size", s.lambda.argmin_per_lambda[i]}});
  j["argmin_per_lambda"] = per_lambda;
  j["parameter_axis"] = to_string(r.axis);
  j["kalman_ratio"] = r.kalman_ratio;
  write_json(path, j);
}

void write_bands_csv(const fs::path& path, const DiscoveryResult& r) {
  auto out = open_out(path);
  out << "step,axis_value,term,mean,std\n";
  for (const ConfidenceBand& b : r.selection.bands) {
    out << b.step << ',' << format_double(r.library.axis_values[b.step]) << ',' << term_at(b.term).label() << ','
        << format_double(b.mean) << ',' << format_double(b.std) << '\n';
  }
  finish(out, path);
}

void write_coeffs_json(const fs::path& path, const DiscoveryResult& r) {
  Json arr = Json::array();
  for (const CoefficientFit& f : r.fits) {
    Json atoms = Json::array();
    for (std::size_t a = 0; a < f.atoms.size(); ++a) {
      const BasisAtom& b = f.atoms[a];
      Json ja{{"kind", to_string(b.kind)}, {"weight", f.weights[a]}};
      if (b.kind == AtomKind::Sine || b.kind == AtomKind::Cosine) ja["omega"] = b.omega;
      if (b.kind == AtomKind::Gaussian) {
        ja["center"] = b.center;
        ja["width"] = b.width;
      }
      atoms.push_back(ja);
    }
    arr.push_back({{"term", f.term ? f.term->label() : ""},
                   {"expression", f.expression},
                   {"atoms", atoms},
                   {"rss", f.rss},
                   {"fit_bic", number(f.fit_bic)},
                   {"ce_percent", f.ce_percent ? number(*f.ce_percent) : Json(nullptr)}});
  }
  write_json(path, Json{{"variable", r.axis == ParameterAxis::Temporal ? "t" : "x"}, {"coefficients", arr}});
}

void write_manifest_json(const fs::path& path, const PipelineConfig& config, const DatasetMeta& meta,
                         const DiscoveryResult* r, const RunInfo& info) {
  Json j;
  j["tool_version"] = kToolVersion;
  j["command"] = info.command;
  j["status"] = info.status;
  if (!info.error.empty()) j["error"] = info.error;
  Json cfg;
  for (const auto& [k, v] : config_entries(config)) cfg[k] = v;
  j["config"] = cfg;
  j["seeds"] = {{"noise_seed", meta.seed}, {"split_seed", config.split_seed}};
  j["threads"] = info.threads;
  j["dataset"] = {{"pde", meta.pde_id ? to_string(*meta.pde_id) : ""},
                  {"noise_percent", meta.noise_percent},
                  {"seed", meta.seed},
                  {"solver_substeps", meta.solver_substeps}};
  if (r != nullptr) {
    j["completed_stages"] = r->completed_stages;
    j["failed_stage"] = r->failed_stage;
    Json timings = Json::array();
    for (const StageTiming& t : r->timings) timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    j["timings"] = timings;
    if (has_stage(*r, "selection")) {
      j["selected_size"] = r->selection.selected_size;
      j["lambda_star"] = r->selection.lambda.lambda_star;
      j["labels"] = r->selected_labels();
    }
    if (has_stage(*r, "coeff_fit")) {
      Json ce;
      for (const CoefficientFit& f : r->fits)
        if (f.term) ce[f.term->label()] = f.ce_percent ? number(*f.ce_percent) : Json(nullptr);
      j["ce_percent"] = ce;
    }
  }
  write_json(path, j);
}

void write_discovery_report(const fs::path& dir, const PipelineConfig& config, const DatasetMeta& meta,
                            const DiscoveryResult& r, const RunInfo& info) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  if (has_stage(r, "selection")) {
    write_scores_csv(dir / "scores.csv", r, r.selection.scores);
    write_filter_csv(dir / "filter.csv", r);
    write_selection_json(dir / "selection.json", r, lambda_grid(config));
    write_bands_csv(dir / "bands.csv", r);
  } else if (has_stage(r, "criteria")) {
    write_scores_csv(dir / "scores.csv", r, r.psd_scores);
  }
  if (has_stage(r, "coeff_fit")) write_coeffs_json(dir / "coeffs.json", r);
  write_manifest_json(dir / "manifest.json", config, meta, &r, info);
}

void write_representation_csv(const fs::path& path, const std::vector<RepresentationError>& rows) {
  auto out = open_out(path);
  out << "representation,rel_error\n";
  for (const auto& row : rows) out << row.representation << ',' << format_double(row.rel_error) << '\n';
  finish(out, path);
}

}  // namespace parapde
