#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "defamekit/cli.hpp"
#include "defamekit/domain.hpp"
#include "defamekit/errors.hpp"
#include "defamekit/stats.hpp"

namespace py = pybind11;
using namespace defamekit;

namespace {

py::dict poster_dict(const PosterOutput& p) {
  py::dict d;
  d["title"] = p.title;
  d["subtitle"] = p.subtitle;
  d["body"] = p.body;
  d["contrast_line"] = p.contrast_line;
  d["signature"] = p.signature;
  d["catchphrase"] = p.catchphrase;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "defamekit core bindings";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<FieldError>(m, "FieldError", PyExc_ValueError);
  py::register_exception<UndefinedStatistic>(m, "UndefinedStatistic", PyExc_ArithmeticError);

  m.def(
      "validate_brief", [](const std::string& doc) { return validate_brief(parse_brief(doc)).violations; },
      py::arg("document"), "Parse a brief and return its invariant violations (empty when valid).");
  m.def(
      "canonicalize_brief", [](const std::string& doc) { return canonicalize_brief_document(doc); }, py::arg("document"));
  m.def(
      "parse_poster",
      [](const std::string& text) {
        const auto r = parse_poster(text);
        py::dict out;
        out["poster"] = r.poster ? py::object(poster_dict(*r.poster)) : py::none();
        std::vector<std::string> failures;
        for (const auto& f : r.failures) failures.push_back(f.to_string());
        out["failures"] = failures;
        return out;
      },
      py::arg("text"));

  m.def(
      "success_estimate",
      [](double p_hat, std::size_t n) {
        const auto e = stats::success_estimate(p_hat, n);
        return std::make_pair(e.p_hat, e.se);
      },
      py::arg("p_hat"), py::arg("n"), "(p_hat, standard error)");
  m.def(
      "expected_time",
      [](double prep_ms, double eval_ms, double p_hat) -> std::optional<double> {
        const auto t = stats::expected_time(prep_ms, eval_ms, stats::waiting_time(p_hat));
        if (t.censored) return std::nullopt;
        return t.ms;
      },
      py::arg("prep_ms"), py::arg("eval_ms"), py::arg("p_hat"), "None when p_hat is 0.");
  m.def(
      "mcnemar",
      [](std::size_t b, std::size_t c) {
        const auto r = stats::mcnemar({0, b, c, 0});
        return std::make_pair(r.chi2, r.p_value);
      },
      py::arg("b"), py::arg("c"), "(chi2, p) from the discordant counts.");
  m.def(
      "spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return stats::spearman(x, y); },
      py::arg("x"), py::arg("y"));

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli_dispatch(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command line; returns (exit_code, stdout, stderr).");
}
