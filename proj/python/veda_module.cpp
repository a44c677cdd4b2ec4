#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "veda/bench.hpp"
#include "veda/error.hpp"

namespace py = pybind11;
using namespace veda;

namespace {

Dataset from_array(py::array_t<float, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 2) throw InputError("expected a 2-d float array");
  const auto n = std::size_t(a.shape(0));
  const auto d = std::uint32_t(a.shape(1));
  std::vector<float> c(a.data(), a.data() + n * d);
  return Dataset(d, std::move(c));
}

py::array_t<float> to_array(const Dataset& ds) {
  py::array_t<float> out({py::ssize_t(ds.size()), py::ssize_t(ds.dim())});
  std::copy(ds.coords().begin(), ds.coords().end(), out.mutable_data());
  return out;
}

std::vector<float> vec(py::array_t<float, py::array::c_style | py::array::forcecast> q) {
  if (q.ndim() != 1) throw InputError("expected a 1-d query vector");
  return {q.data(), q.data() + q.size()};
}

py::list hits(const std::vector<Neighbor>& ns) {
  py::list out;
  for (const auto& n : ns) out.append(py::make_tuple(n.id, n.dist));
  return out;
}

RoleSet roles_of(const std::vector<std::uint32_t>& rs) {
  RoleSet s;
  for (auto r : rs) s.set(r);
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core bindings";

  auto base = py::register_exception<Error>(m, "VedaError");
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<AuthorizationError>(m, "AuthorizationError", base.ptr());
  py::register_exception<CoverageError>(m, "CoverageError", base.ptr());

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&from_array), py::arg("array"))
      .def_property_readonly("size", &Dataset::size)
      .def_property_readonly("dim", &Dataset::dim)
      .def("__len__", &Dataset::size)
      .def("to_numpy", &to_array);

  m.def("load_fvecs", [](const std::filesystem::path& p) { return load_fvecs(p); }, py::arg("path"));
  m.def("save_fvecs", &save_fvecs, py::arg("dataset"), py::arg("path"));
  m.def("gen_dataset", &gen_dataset, py::arg("n"), py::arg("dim"), py::arg("clusters") = 32, py::arg("seed") = 1,
        py::arg("spread") = 3.0);
  m.def(
      "brute_force_topk",
      [](const Dataset& ds, py::array_t<float> q, std::size_t k) { return hits(brute_force_topk(ds, vec(q), k)); },
      py::arg("dataset"), py::arg("query"), py::arg("k"));

  py::class_<AccessMatrix>(m, "AccessMatrix")
      .def_static("from_rows", &AccessMatrix::from_rows, py::arg("rows"), py::arg("n_roles") = 0)
      .def_property_readonly("rows", &AccessMatrix::rows)
      .def_property_readonly("n_roles", [](const AccessMatrix& a) { return a.n_roles; })
      .def("row", [](const AccessMatrix& a, std::size_t i) {
        if (i >= a.rows()) throw py::index_error();
        auto r = a.row(i);
        return std::vector<std::uint32_t>(r.begin(), r.end());
      })
      .def_static("load", [](const std::filesystem::path& p) { return load_access(p); }, py::arg("path"))
      .def("save", [](const AccessMatrix& a, const std::filesystem::path& p) { save_access(a, p); }, py::arg("path"));

  py::class_<ExclusiveLattice>(m, "ExclusiveLattice")
      .def_static("build", &ExclusiveLattice::build, py::arg("access"))
      .def_property_readonly("n_roles", &ExclusiveLattice::n_roles)
      .def_property_readonly("n_vectors", &ExclusiveLattice::n_vectors)
      .def_property_readonly("n_blocks", &ExclusiveLattice::size)
      .def("authorized_count", py::overload_cast<Role>(&ExclusiveLattice::authorized_count, py::const_),
           py::arg("role"))
      .def("authorized_ids", &ExclusiveLattice::authorized_ids, py::arg("role"))
      .def("roles_of", [](const ExclusiveLattice& ex, std::uint32_t id) { return ex.tag_of(id).roles(); });

  py::class_<Theta>(m, "Theta")
      .def(py::init<>())
      .def_readwrite("a", &Theta::a)
      .def_readwrite("b", &Theta::b)
      .def_readwrite("c", &Theta::c)
      .def_readwrite("scan", &Theta::scan)
      .def("to_json", &theta_to_json)
      .def_static("from_json", &theta_from_json);
  m.def("c_theta", &c_theta, py::arg("theta"), py::arg("n"), py::arg("efs"));
  m.def("crossover_size", &crossover_size, py::arg("theta"), py::arg("efs") = 100);

  py::class_<PolicySpec>(m, "PolicySpec")
      .def(py::init<>())
      .def_readwrite("n_roles", &PolicySpec::n_roles)
      .def_readwrite("n_departments", &PolicySpec::n_departments)
      .def_readwrite("n_blocks", &PolicySpec::n_blocks)
      .def_readwrite("block_s", &PolicySpec::block_s)
      .def_readwrite("block_alpha", &PolicySpec::block_alpha)
      .def_readwrite("perm_s", &PolicySpec::perm_s)
      .def_readwrite("perm_alpha", &PolicySpec::perm_alpha)
      .def_readwrite("seed", &PolicySpec::seed);
  m.def("gen_policy", [](const PolicySpec& s, std::size_t n) { return gen_policy(s, n).access; }, py::arg("spec"),
        py::arg("n_vectors"));

  py::class_<LayoutManifest>(m, "LayoutManifest")
      .def_readonly("optimizer", &LayoutManifest::optimizer)
      .def_readonly("beta", &LayoutManifest::beta)
      .def_readonly("sa", &LayoutManifest::sa)
      .def_property_readonly("stored", &LayoutManifest::stored)
      .def_property_readonly("index_count", &LayoutManifest::index_count)
      .def_property_readonly("unit_count", [](const LayoutManifest& m) { return m.units.size(); })
      .def("modeled_cost", [](const LayoutManifest& m) { return m.modeled_cost(); })
      .def("role_cost", [](const LayoutManifest& m, Role r) { return m.modeled_cost(r); }, py::arg("role"))
      .def("to_json", &LayoutManifest::to_json)
      .def_static("from_json", &LayoutManifest::from_json);

  m.def(
      "optimize",
      [](const ExclusiveLattice& ex, double beta, const std::string& optimizer, std::size_t lambda_threshold,
         std::size_t efs, const Theta& theta) {
        OptimizerConfig c;
        c.beta = beta;
        c.lambda_threshold = lambda_threshold;
        c.efs = efs;
        c.theta = theta;
        return optimize(ex, c, parse_optimizer(optimizer)).final.manifest;
      },
      py::arg("lattice"), py::arg("beta") = 1.5, py::arg("optimizer") = "effveda", py::arg("lambda_threshold") = 0,
      py::arg("efs") = 100, py::arg("theta") = Theta{});
  m.def("global_manifest", &global_manifest, py::arg("lattice"), py::arg("theta") = Theta{}, py::arg("efs") = 100);
  m.def("oracle_manifest", &oracle_manifest, py::arg("lattice"), py::arg("theta") = Theta{}, py::arg("efs") = 100,
        py::arg("lambda_threshold") = 0);

  // The layout keeps pointers to the dataset and lattice; keep them alive with it.
  py::class_<Layout>(m, "Layout")
      .def(py::init([](const Dataset& ds, const ExclusiveLattice& ex, const LayoutManifest& man, std::uint32_t M,
                       std::uint32_t efc, std::uint64_t seed) {
             return Layout(ds, ex, man, HnswParams{M, 0, efc, seed});
           }),
           py::arg("dataset"), py::arg("lattice"), py::arg("manifest"), py::arg("M") = 16, py::arg("efc") = 200,
           py::arg("seed") = 0x5eed, py::keep_alive<1, 2>(), py::keep_alive<1, 3>())
      .def(
          "query",
          [](const Layout& l, py::array_t<float> q, Role role, std::size_t k, std::size_t efs,
             const std::string& strategy) { return hits(l.exec(vec(q), role, k, efs, parse_strategy(strategy))); },
          py::arg("query"), py::arg("role"), py::arg("k") = 10, py::arg("efs") = 100,
          py::arg("strategy") = "coordinated")
      .def(
          "query_roles",
          [](const Layout& l, py::array_t<float> q, const std::vector<std::uint32_t>& roles, std::size_t k,
             std::size_t efs, const std::string& strategy) {
            return hits(l.exec_multi_role(vec(q), roles_of(roles), k, efs, parse_strategy(strategy)));
          },
          py::arg("query"), py::arg("roles"), py::arg("k") = 10, py::arg("efs") = 100,
          py::arg("strategy") = "coordinated")
      .def_property_readonly("manifest", &Layout::manifest, py::return_value_policy::reference_internal);
}
