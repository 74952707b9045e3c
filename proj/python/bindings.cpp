#include "tubelab/dichotomy.hpp"
#include "tubelab/experiment.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace tubelab;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<Vec> rows_of(const RowMatrix& m) {
  std::vector<Vec> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).transpose());
  return out;
}

TubeFamily make_family(const RowMatrix& centers, const RowMatrix& directions, double delta, int d, double beta) {
  if (centers.rows() != directions.rows() || centers.cols() != directions.cols())
    throw DomainError("centers and directions must have the same shape");
  std::vector<Tube> tubes;
  for (Eigen::Index i = 0; i < centers.rows(); ++i)
    tubes.emplace_back(centers.row(i).transpose(), Direction(directions.row(i).transpose()), delta);
  return TubeFamily(static_cast<int>(centers.cols()), delta, {d, beta}, std::move(tubes));
}

RowMatrix centers_of(const TubeFamily& f) {
  RowMatrix m(static_cast<Eigen::Index>(f.size()), f.n());
  for (std::size_t i = 0; i < f.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = f.tubes()[i].center.transpose();
  return m;
}

RowMatrix directions_of(const TubeFamily& f) {
  RowMatrix m(static_cast<Eigen::Index>(f.size()), f.n());
  for (std::size_t i = 0; i < f.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = f.tubes()[i].direction.vec().transpose();
  return m;
}

GeneratorSpec spec_from(const std::string& kind, int n, int d, double beta, double delta, std::uint64_t seed, int count,
                        int k) {
  GeneratorSpec s;
  s.kind = parse_generator_kind(kind);
  s.n = n;
  s.d = d;
  s.beta = beta;
  s.delta = delta;
  s.seed = seed;
  s.count = count;
  s.k = k;
  return s;
}

py::dict fit_dict(const ExponentFit& f) {
  py::dict out;
  out["slope"] = f.slope;
  out["intercept"] = f.intercept;
  out["residual"] = f.residual;
  out["scales"] = f.scales;
  out["values"] = f.values;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Line-space geometry, tube functionals and experiments on unions of lines";
  m.attr("__version__") = kVersion;

  // later registrations are tried first, so the base class goes first
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<BudgetExceeded>(m, "BudgetExceeded", PyExc_RuntimeError);
  py::register_exception<ResolutionError>(m, "ResolutionError", PyExc_ValueError);

  m.def(
      "line_metric",
      [](const Vec& x1, const Vec& u1, const Vec& x2, const Vec& u2) {
        return line_metric(Line(Direction(u1), x1), Line(Direction(u2), x2));
      },
      py::arg("x1"), py::arg("u1"), py::arg("x2"), py::arg("u2"),
      "Distance |x - x'| + |u ^ u'| between the lines through x1, x2 with directions u1, u2.");

  m.def(
      "wedge_volume", [](const RowMatrix& vs) { return wedge_volume(rows_of(vs)); }, py::arg("vectors"),
      "Volume of the parallelepiped spanned by the rows (unit vectors).");

  py::class_<TubeFamily>(m, "TubeFamily")
      .def(py::init(&make_family), py::arg("centers"), py::arg("directions"), py::arg("delta"), py::arg("d") = 1,
           py::arg("beta") = 1.0)
      .def_property_readonly("n", &TubeFamily::n)
      .def_property_readonly("delta", &TubeFamily::delta)
      .def_property_readonly("centers", &centers_of)
      .def_property_readonly("directions", &directions_of)
      .def("total_volume", &TubeFamily::total_volume)
      .def("__len__", &TubeFamily::size)
      .def("__repr__", [](const TubeFamily& f) {
        return "<TubeFamily n=" + std::to_string(f.n()) + " tubes=" + std::to_string(f.size()) +
               " delta=" + std::to_string(f.delta()) + ">";
      });

  m.def(
      "generate",
      [](const std::string& kind, int n, int d, double beta, double delta, std::uint64_t seed, int count, int k) {
        return generate(spec_from(kind, n, d, beta, delta, seed, count, k));
      },
      py::arg("kind"), py::arg("n") = 2, py::arg("d") = 1, py::arg("beta") = 1.0, py::arg("delta") = 1.0 / 16,
      py::arg("seed") = 0, py::arg("count") = 0, py::arg("k") = 2,
      "Tube family from a named generator: planes, random-nonconcentrated, bush or axes.");

  m.def("cantor_offsets", &cantor_offsets, py::arg("beta"), py::arg("delta"));

  m.def(
      "lp_norm",
      [](const TubeFamily& f, double p, double h_over_delta) {
        py::gil_scoped_release release;
        return lp_norm_tube_sum(f, p, default_grid(f, h_over_delta));
      },
      py::arg("family"), py::arg("p"), py::arg("h_over_delta") = 0.25, "||sum chi_T||_p on the default grid.");

  m.def(
      "multilinear_kakeya_ratio",
      [](const std::vector<TubeFamily>& fams, double h_over_delta) {
        if (fams.empty()) throw DomainError("need at least one family");
        std::vector<Tube> all;
        for (const auto& f : fams) all.insert(all.end(), f.tubes().begin(), f.tubes().end());
        const double delta = fams.front().delta();
        py::gil_scoped_release release;
        const double lhs = multilinear_kakeya_lhs(fams, Grid::covering(all, delta, h_over_delta * delta));
        return lhs / multilinear_kakeya_rhs(fams);
      },
      py::arg("families"), py::arg("h_over_delta") = 0.125);

  m.def(
      "split_by_axis", &split_by_axis, py::arg("family"), py::arg("k"),
      "Split by dominant direction coordinate; empty when some class would be empty.");

  m.def(
      "decide_dichotomy",
      [](const RowMatrix& dirs, int k, double rho, std::uint64_t seed) {
        std::vector<Direction> items;
        for (const auto& v : rows_of(dirs)) items.emplace_back(v);
        const DirectionMultiset u(static_cast<int>(dirs.cols()), std::move(items));
        const auto r = decide_dichotomy(u, k, rho, seed);
        py::dict out;
        if (r.is_a()) {
          out["option"] = "A";
          out["good_tuples"] = r.a().good_tuple_count;
        } else {
          out["option"] = "B";
          out["captured"] = r.b().captured_count;
          RowMatrix basis(r.b().witness.dim(), dirs.cols());
          for (int i = 0; i < r.b().witness.dim(); ++i) basis.row(i) = r.b().witness.basis()[i].transpose();
          out["witness"] = basis;
        }
        return out;
      },
      py::arg("directions"), py::arg("k"), py::arg("rho"), py::arg("seed") = 0x5eed,
      "Option A (many transverse k-tuples) or Option B (a (k-1)-plane capturing many directions).");

  m.def(
      "ball_condition_ratio",
      [](const TubeFamily& f, const std::string& net) {
        if (net != "product" && net != "enclosing") throw DomainError("net must be 'product' or 'enclosing'");
        py::gil_scoped_release release;
        return ball_condition_worst_ratio(
            f, net == "product" ? BallNet::product(f.n(), f.delta()) : BallNet::enclosing(f.n(), f.delta()));
      },
      py::arg("family"), py::arg("net") = "product", "Worst count / (r/delta)^s over the net.");

  m.def(
      "fit_power_law", [](const std::vector<double>& x, const std::vector<double>& y) { return fit_dict(fit_power_law(x, y)); },
      py::arg("scales"), py::arg("values"));

  m.def(
      "holder_comparison",
      [](const TubeFamily& f, double h_over_delta) {
        const auto h = holder_comparison(f, default_grid(f, h_over_delta), f.params().exponent());
        py::dict out;
        out["tube_mass"] = h.tube_mass;
        out["e_volume"] = h.e_volume;
        out["norm"] = h.norm;
        out["holder_rhs"] = h.holder_rhs;
        out["chain_holds"] = h.chain_holds;
        out["dimension"] = fit_dict(h.dimension);
        out["exponent_deficit"] = h.exponent_deficit;
        return out;
      },
      py::arg("family"), py::arg("h_over_delta") = 0.25);

  m.def(
      "run_scenario",
      [](const std::string& config_json) {
        const auto cfg = ExperimentConfig::from_json(ordered_json::parse(config_json));
        ExperimentReport r;
        {
          py::gil_scoped_release release;
          r = run_scenario(cfg);
        }
        return r.to_json().dump();
      },
      py::arg("config_json"), "Run one scenario from a JSON config string; returns the report as JSON text.");

  m.def("scenarios", [] {
    std::vector<std::string> names;
    for (const auto& s : scenarios()) names.push_back(s.name);
    return names;
  });
}
