#include <algorithm>
#include <cstdio>
#include <sstream>

#include "defamekit/bench.hpp"

namespace defamekit {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string percent(double v, int digits = 1) { return fixed(100.0 * v, digits) + "%"; }

std::string row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& c : cells) out += " " + c + " |";
  return out + "\n";
}

std::string rule(std::size_t n) {
  std::string out = "|";
  for (std::size_t i = 0; i < n; ++i) out += "---|";
  return out + "\n";
}

std::vector<std::string> percentile_cells(const stats::PercentileTable& t, double scale, int digits, const char* unit) {
  std::vector<std::string> c;
  for (double v : {t.min, t.p25, t.median, t.p75, t.p95, t.max}) c.push_back(fixed(v * scale, digits) + unit);
  return c;
}

std::string opt(const std::optional<double>& v, int digits = 3) { return v ? fixed(*v, digits) : "n/a"; }

}  // namespace

std::string render_report(const BenchAnalysis& a) {
  std::ostringstream out;
  out << "# Benchmark report\n\n";
  if (a.models.empty()) {
    out << "## No data\n\nThe input contained no judged attempts.\n";
    return out.str();
  }

  out << "## Success rates\n\n";
  out << row({"Model", "Success", "SE", "n"}) << rule(4);
  for (const auto& m : a.models)
    out << row({m.model_id, percent(m.overall.p_hat), percent(m.overall.se), std::to_string(m.overall.n)});

  out << "\n## Median generation timing\n\n";
  std::vector<std::string> head{"Component (median)"};
  std::vector<std::string> prep{"Model loading (prep)"}, eval{"Single-attempt total (eval)"}, tok{"Per-token generation"};
  for (const auto& m : a.models) {
    head.push_back(m.model_id);
    prep.push_back(fixed(m.prep_ms, 0) + " ms");
    eval.push_back(fixed(m.eval_ms, 0) + " ms");
    tok.push_back(fixed(m.per_token_ms, 2) + " ms");
  }
  out << row(head) << rule(head.size()) << row(prep) << row(eval) << row(tok);

  out << "\n## Expected attempts to success\n\n";
  out << row({"Model", "Min", "P25", "Med", "P75", "P95", "Max", "Censored"}) << rule(8);
  for (const auto& m : a.models) {
    auto cells = m.attempts_table ? percentile_cells(*m.attempts_table, 1.0, 2, "")
                                  : std::vector<std::string>(6, "n/a");
    cells.insert(cells.begin(), m.model_id);
    cells.push_back(std::to_string(m.censored));
    out << row(cells);
  }

  out << "\n## Expected time-to-success (seconds)\n\n";
  out << row({"Model", "Min", "P25", "Med", "P75", "P95", "Max"}) << rule(7);
  for (const auto& m : a.models) {
    auto cells = m.time_table ? percentile_cells(*m.time_table, 1e-3, 2, " s") : std::vector<std::string>(6, "n/a");
    cells.insert(cells.begin(), m.model_id);
    out << row(cells);
  }

  out << "\n## Output length\n\n";
  out << row({"Model", "Mean tokens", "CV"}) << rule(3);
  for (const auto& m : a.models)
    out << row({m.model_id, m.tokens ? fixed(m.tokens->mean, 1) : "n/a", m.tokens ? percent(m.tokens->cv) : "n/a"});

  if (!a.pairs.empty()) {
    out << "\n## Model comparisons\n\n";
    out << row({"Pair", "Spearman rho", "rho (difficult subset)", "b", "c", "McNemar chi2", "p"}) << rule(7);
    for (const auto& p : a.pairs) {
      out << row({p.first + " vs " + p.second, opt(p.rho), opt(p.subset_rho), std::to_string(p.outcome.first_only),
                  std::to_string(p.outcome.second_only), p.mcnemar ? fixed(p.mcnemar->chi2, 3) : "n/a",
                  p.mcnemar ? fixed(p.mcnemar->p_value, 3) : "n/a"});
    }
  }

  if (a.difficulty) {
    out << "\n## Difficulty subset\n\n";
    out << "Pooled " << fixed(100.0 * a.difficulty_quantile, 0) << "th percentile of per-prompt success: "
        << fixed(a.difficulty->threshold, 3) << "\n";
    std::size_t prompts = 0;
    if (!a.models.empty()) prompts = a.models.front().prompts.size();
    out << "Prompts with mean success below the threshold: " << a.difficulty->prompts.size() << " of " << prompts
        << "\n";
    if (!a.difficulty->prompts.empty()) {
      out << "\n";
      for (const auto& id : a.difficulty->prompts) out << "- " << id << "\n";
    }
  }
  return out.str();
}

std::map<std::string, std::string> render_csv(const BenchAnalysis& a) {
  std::map<std::string, std::string> files;
  std::ostringstream s;
  s << "model_id,p_hat,se,n\n";
  for (const auto& m : a.models) s << m.model_id << "," << fixed(m.overall.p_hat, 6) << "," << fixed(m.overall.se, 6) << "," << m.overall.n << "\n";
  files["success_rates.csv"] = s.str();

  std::ostringstream t;
  t << "model_id,prep_ms,eval_ms,per_token_ms,mean_tokens,token_cv\n";
  for (const auto& m : a.models)
    t << m.model_id << "," << fixed(m.prep_ms, 3) << "," << fixed(m.eval_ms, 3) << "," << fixed(m.per_token_ms, 4) << ","
      << (m.tokens ? fixed(m.tokens->mean, 3) : "") << "," << (m.tokens ? fixed(m.tokens->cv, 6) : "") << "\n";
  files["timing.csv"] = t.str();

  std::ostringstream pp;
  pp << "model_id,prompt_id,p_hat,se,n,waiting,expected_ms,censored\n";
  for (const auto& m : a.models)
    for (const auto& r : m.prompts)
      pp << m.model_id << "," << r.prompt_id << "," << fixed(r.estimate.p_hat, 6) << "," << fixed(r.estimate.se, 6) << ","
         << r.estimate.n << "," << (r.waiting.censored ? "" : fixed(r.waiting.value, 6)) << ","
         << (r.expected.censored ? "" : fixed(r.expected.ms, 3)) << "," << (r.waiting.censored ? 1 : 0) << "\n";
  files["per_prompt.csv"] = pp.str();

  auto table_csv = [&](bool time) {
    std::ostringstream o;
    o << "model_id,min,p25,median,p75,p95,max\n";
    for (const auto& m : a.models) {
      const auto& t = time ? m.time_table : m.attempts_table;
      if (!t) continue;
      o << m.model_id;
      for (double v : {t->min, t->p25, t->median, t->p75, t->p95, t->max}) o << "," << fixed(v, time ? 3 : 6);
      o << "\n";
    }
    return o.str();
  };
  files["expected_time_percentiles.csv"] = table_csv(true);
  files["expected_attempts_percentiles.csv"] = table_csv(false);

  auto ecdf_csv = [&](bool time) {
    std::ostringstream o;
    o << "model_id,value,ecdf\n";
    for (const auto& m : a.models) {
      const auto& c = time ? m.time_ecdf : m.attempts_ecdf;
      for (std::size_t i = 0; i < c.values.size(); ++i)
        o << m.model_id << "," << fixed(c.values[i], 6) << "," << fixed(c.heights[i], 6) << "\n";
    }
    return o.str();
  };
  files["ecdf_expected_time.csv"] = ecdf_csv(true);
  files["ecdf_expected_attempts.csv"] = ecdf_csv(false);

  std::ostringstream pr;
  pr << "first,second,spearman,spearman_subset,a,b,c,d,mcnemar_chi2,mcnemar_p\n";
  for (const auto& p : a.pairs)
    pr << p.first << "," << p.second << "," << (p.rho ? fixed(*p.rho, 6) : "") << ","
       << (p.subset_rho ? fixed(*p.subset_rho, 6) : "") << "," << p.outcome.both_pass << "," << p.outcome.first_only
       << "," << p.outcome.second_only << "," << p.outcome.both_fail << ","
       << (p.mcnemar ? fixed(p.mcnemar->chi2, 6) : "") << "," << (p.mcnemar ? fixed(p.mcnemar->p_value, 6) : "") << "\n";
  files["model_pairs.csv"] = pr.str();

  std::ostringstream d;
  d << "threshold,prompt_id\n";
  if (a.difficulty)
    for (const auto& id : a.difficulty->prompts) d << fixed(a.difficulty->threshold, 6) << "," << id << "\n";
  files["difficulty_subset.csv"] = d.str();
  return files;
}

std::string render_ecdf_svg(const std::vector<EcdfSeries>& series, const std::string& title, const std::string& x_label) {
  using namespace svg;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  double lo = 0, hi = 1;
  bool any = false;
  for (const auto& s : series) {
    if (s.curve.values.empty()) continue;
    lo = any ? std::min(lo, s.curve.values.front()) : s.curve.values.front();
    hi = any ? std::max(hi, s.curve.values.back()) : s.curve.values.back();
    any = true;
  }
  if (hi <= lo) hi = lo + 1;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto px = [&](double x) { return kLeft + (x - lo) / (hi - lo) * plot_w; };
  auto py = [&](double h) { return kTop + (1.0 - h) * plot_h; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(kWidth, 0) << "\" height=\"" << fixed(kHeight, 0)
    << "\" viewBox=\"0 0 " << fixed(kWidth, 0) << " " << fixed(kHeight, 0) << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fixed(kWidth / 2, 1) << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
    << title << "</text>\n";
  o << "<line x1=\"" << fixed(kLeft, 1) << "\" y1=\"" << fixed(py(0), 1) << "\" x2=\"" << fixed(kLeft + plot_w, 1)
    << "\" y2=\"" << fixed(py(0), 1) << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << fixed(kLeft, 1) << "\" y1=\"" << fixed(py(0), 1) << "\" x2=\"" << fixed(kLeft, 1) << "\" y2=\""
    << fixed(py(1), 1) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double h = k / 4.0;
    o << "<text x=\"" << fixed(kLeft - 6, 1) << "\" y=\"" << fixed(py(h) + 4, 1)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fixed(h, 2) << "</text>\n";
    const double x = lo + (hi - lo) * k / 4.0;
    o << "<text x=\"" << fixed(px(x), 1) << "\" y=\"" << fixed(py(0) + 16, 1)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << fixed(x, 2) << "</text>\n";
  }
  o << "<text x=\"" << fixed(kLeft + plot_w / 2, 1) << "\" y=\"" << fixed(kHeight - 10, 1)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& c = series[i].curve;
    if (c.values.empty()) continue;
    const char* color = kColors[i % 6];
    o << "<polyline class=\"ecdf\" data-label=\"" << series[i].label << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" points=\"";
    o << fixed(px(lo), 2) << "," << fixed(py(0), 2);
    double prev = 0.0;
    for (std::size_t k = 0; k < c.values.size(); ++k) {
      o << " " << fixed(px(c.values[k]), 2) << "," << fixed(py(prev), 2);
      o << " " << fixed(px(c.values[k]), 2) << "," << fixed(py(c.heights[k]), 2);
      prev = c.heights[k];
    }
    o << " " << fixed(px(hi), 2) << "," << fixed(py(prev), 2) << "\"/>\n";
    o << "<text x=\"" << fixed(kLeft + plot_w - 4, 1) << "\" y=\"" << fixed(kTop + 14 + 14 * i, 1)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << color << "\">" << series[i].label
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::map<std::string, std::string> render_ecdf_svgs(const BenchAnalysis& a) {
  std::vector<EcdfSeries> attempts, times;
  for (const auto& m : a.models) {
    attempts.push_back({m.model_id, m.attempts_ecdf});
    EcdfSeries t{m.model_id, m.time_ecdf};
    for (auto& v : t.curve.values) v *= 1e-3;
    times.push_back(std::move(t));
  }
  return {{"ecdf_expected_attempts.svg", render_ecdf_svg(attempts, "ECDF of expected attempts to success", "attempts")},
          {"ecdf_expected_time.svg", render_ecdf_svg(times, "ECDF of expected time-to-success", "seconds")}};
}

}  // namespace defamekit
