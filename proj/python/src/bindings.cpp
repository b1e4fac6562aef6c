#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cape/cli.hpp"
#include "cape/gp.hpp"
#include "cape/inventory.hpp"
#include "cape/metrics.hpp"
#include "cape/scoring.hpp"
#include "cape/session.hpp"
#include "cape/stats.hpp"

namespace py = pybind11;
using namespace cape;

namespace {

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

std::vector<ScoringTrajectory> trajectories(const std::vector<std::vector<int>>& runs) {
  std::vector<ScoringTrajectory> out;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    ScoringTrajectory t;
    t.run_id = "r" + std::to_string(r + 1);
    t.scores = runs[r];
    for (std::size_t k = 0; k < runs[r].size(); ++k) t.item_ids.push_back("i" + std::to_string(k + 1));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_cape, m) {
  m.doc() = "Native core of the cape package.";

  // Released on purpose: the type must outlive interpreter teardown.
  static py::handle error_type = py::exception<Error>(m, "Error").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = error_type(py::str(e.what()));
      inst.attr("code") = py::str(e.code());
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  py::class_<Inventory, std::shared_ptr<Inventory>>(m, "Inventory")
      .def_property_readonly("name", &Inventory::name)
      .def("__len__", &Inventory::size)
      .def_property_readonly("item_ids",
                             [](const Inventory& inv) {
                               std::vector<std::string> ids;
                               for (const auto& item : inv.items()) ids.push_back(item.id);
                               return ids;
                             })
      .def("trait_of", [](const Inventory& inv, const std::string& id) {
        return std::string(1, trait_letter(inv.at(id).trait));
      })
      .def("to_dict", [](const Inventory& inv) { return to_python(inv.to_json()); });

  m.def("load_inventory", [](const std::filesystem::path& p) { return std::make_shared<Inventory>(load_inventory(p)); },
        py::arg("path"));

  m.def("tar", [](const std::vector<std::vector<int>>& runs) { return tar(trajectories(runs)); }, py::arg("runs"),
        "Percentage of items answered identically in every run.");
  m.def("ed", [](const std::vector<std::vector<int>>& runs) { return ed(trajectories(runs)); }, py::arg("runs"),
        "Mean pairwise absolute score gap per item.");
  m.def("tc", [](const std::vector<std::vector<double>>& runs) { return tc_series(runs); },
        py::arg("runs"), "Trajectory consistency in [0, 100] over equal-length score series.");
  m.def(
      "oc",
      [](const std::vector<std::array<double, 5>>& vectors) {
        std::vector<OceanScore> scores;
        for (const auto& v : vectors) scores.push_back(OceanScore{v});
        return oc(scores);
      },
      py::arg("vectors"), "Consistency of OCEAN vectors, each given in O, C, E, A, N order.");
  m.def(
      "union_width",
      [](const std::vector<std::pair<double, double>>& intervals) {
        std::vector<Interval> ivs;
        for (const auto& [lo, hi] : intervals) ivs.push_back({lo, hi});
        return union_width(ivs);
      },
      py::arg("intervals"));

  m.def(
      "consistency_report",
      [](const std::filesystem::path& transcripts, const std::filesystem::path& inventory) {
        const auto inv = load_inventory(inventory);
        std::vector<ScoringTrajectory> trajs;
        for (const auto& t : read_transcripts(transcripts)) trajs.push_back(trajectory_from_transcript(t));
        return to_python(consistency_report(trajs, inv).to_json());
      },
      py::arg("transcripts"), py::arg("inventory"),
      "TAR, ED, TC and OC over every transcript in a directory.");
  m.def(
      "read_transcripts",
      [](const std::filesystem::path& dir) {
        py::list out;
        for (const auto& t : read_transcripts(dir)) {
          py::dict d;
          d["run_id"] = t.run_id;
          d["invalid"] = t.invalid;
          d["scores"] = trajectory_from_transcript(t).scores;
          out.append(d);
        }
        return out;
      },
      py::arg("dir"));

  m.def(
      "log_marginal_likelihood",
      [](const std::vector<double>& xs, const std::vector<double>& ys, double signal, double length, double noise) {
        return gp::log_marginal_likelihood(xs, ys, gp::KernelParams{signal, length, noise});
      },
      py::arg("xs"), py::arg("ys"), py::arg("signal_variance"), py::arg("length_scale"), py::arg("noise_variance"));
  m.def(
      "fit_gpr",
      [](const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<double>& query) {
        const auto post = gp::fit_gpr(xs, ys, query);
        py::dict d;
        d["mean"] = post.mean;
        d["variance"] = post.variance;
        d["signal_variance"] = post.params.signal_variance;
        d["length_scale"] = post.params.length_scale;
        d["noise_variance"] = post.params.noise_variance;
        d["log_marginal_likelihood"] = post.log_marginal_likelihood;
        return d;
      },
      py::arg("xs"), py::arg("ys"), py::arg("query"));

  py::class_<stats::TestResult>(m, "TestResult")
      .def_readonly("statistic", &stats::TestResult::statistic)
      .def_readonly("p_value", &stats::TestResult::p_value)
      .def_readonly("df", &stats::TestResult::df)
      .def_readonly("effect_size", &stats::TestResult::effect_size)
      .def_property_readonly("method", [](const stats::TestResult& r) { return stats::method_name(r.method); })
      .def("__repr__", [](const stats::TestResult& r) { return "TestResult(" + r.to_json().dump() + ")"; });

  using Vec = std::vector<double>;
  m.def("pearson", [](const Vec& x, const Vec& y) { return stats::pearson(x, y); }, py::arg("x"), py::arg("y"));
  m.def("spearman", [](const Vec& x, const Vec& y) { return stats::spearman(x, y); }, py::arg("x"), py::arg("y"));
  m.def("welch_t", [](const Vec& a, const Vec& b) { return stats::welch_t(a, b); }, py::arg("a"), py::arg("b"));
  m.def("student_t", [](const Vec& a, const Vec& b) { return stats::student_t(a, b); }, py::arg("a"), py::arg("b"));
  m.def("wilcoxon", [](const Vec& a, const Vec& b) { return stats::wilcoxon(a, b); }, py::arg("a"), py::arg("b"));
  m.def("anova_oneway", &stats::anova_oneway, py::arg("groups"));
  m.def("cronbach_alpha", &stats::cronbach_alpha, py::arg("rows"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run_main(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
