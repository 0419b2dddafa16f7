// Python bindings. Laws and disorder models cross the boundary as JSON
// strings (the same documents the CLI reads); arrays go through numpy.

#include "semiflex/chain.hpp"
#include "semiflex/diffusion.hpp"
#include "semiflex/disorder.hpp"
#include "semiflex/harmonics.hpp"
#include "semiflex/presets.hpp"
#include "semiflex/rotgroup.hpp"
#include "semiflex/serialize.hpp"
#include "semiflex/stats.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace semiflex;
using nlohmann::json;

namespace {

RotationLaw law_of(const std::string& spec) { return make_law(json::parse(spec)); }

DisorderModel disorder_of(const std::string& spec, std::uint64_t seed) {
  return make_disorder(json::parse(spec), seed);
}

Rotation frame_of(const Vector& v0) { return frame_from_direction(UnitVector::normalized(v0)); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "semiflex core";
  m.attr("__version__") = SEMIFLEX_VERSION;

  py::register_exception<std::domain_error>(m, "DomainError", PyExc_ValueError);

  m.def("preset_names", &preset_names);
  m.def("preset", [](const std::string& name) { return preset(name).dump(); });
  m.def("law_shorthand", [](const std::string& name, std::optional<int> dim) { return law_shorthand(name, dim).dump(); },
        py::arg("name"), py::arg("dim") = std::nullopt);
  m.def("disorder_shorthand",
        [](const std::string& name, std::optional<int> dim) { return disorder_shorthand(name, dim).dump(); },
        py::arg("name"), py::arg("dim") = std::nullopt);

  m.def("moments", [](const std::string& law) {
    const auto mom = moments_exact(law_of(law));
    return py::make_tuple(Matrix(mom.mean), Matrix(mom.second.entries()));
  });
  m.def("check_hypothesis", [](const std::string& law) { return to_json(check_hypothesis(law_of(law))).dump(); });

  m.def(
      "sigma2_series",
      [](const std::string& law, const std::string& disorder, std::uint64_t seed, std::size_t L, double tolerance,
         int threads) {
        Sigma2Options opt;
        opt.L = L;
        opt.tolerance = tolerance;
        opt.threads = resolve_threads(threads);
        py::gil_scoped_release nogil;
        return to_json(sigma2_series(law_of(law), disorder_of(disorder, seed), opt)).dump();
      },
      py::arg("law"), py::arg("disorder"), py::arg("seed") = 1, py::arg("L") = 10000, py::arg("tolerance") = 1e-10,
      py::arg("threads") = 1);
  m.def("sigma2_cI", &sigma2_cI, py::arg("c"), py::arg("d"));
  m.def("sigma2_iid_closed", &sigma2_iid_closed, py::arg("rbar"), py::arg("omega_bar"));
  m.def(
      "sigma2_oracle_2d",
      [](const std::string& law, const std::string& disorder, std::uint64_t seed) {
        const auto r = sigma2_oracle_2d(so2_spectrum(law_of(law), 1), disorder_of(disorder, seed));
        json j{{"sigma2", r.sigma2}, {"K", r.K}, {"tail_bound", r.tail_bound}, {"mode", r.mode}};
        j["mc_se"] = r.mc_se ? json(*r.mc_se) : json(nullptr);
        return j.dump();
      },
      py::arg("law"), py::arg("disorder"), py::arg("seed") = 1);
  m.def("drift_bound_2d", [](const std::string& law) { return drift_bound_2d(so2_spectrum(law_of(law), 1)); });

  m.def(
      "simulate_chain",
      [](const std::string& law, const std::string& disorder, const Vector& v0, std::size_t n, std::uint64_t seed,
         std::uint64_t disorder_seed) {
        RngStream rng(seed);
        const auto t = simulate_chain(law_of(law), disorder_of(disorder, disorder_seed), frame_of(v0), n, rng);
        Matrix out(t.positions.size(), t.dim);
        for (std::size_t i = 0; i < t.positions.size(); ++i) out.row(i) = t.positions[i].transpose();
        return out;
      },
      py::arg("law"), py::arg("disorder"), py::arg("v0"), py::arg("n"), py::arg("seed") = 1,
      py::arg("disorder_seed") = 1);
  m.def(
      "simulate_endpoints",
      [](const std::string& law, const std::string& disorder, const Vector& v0, std::vector<std::size_t> checkpoints,
         std::size_t replicas, std::uint64_t seed, std::uint64_t disorder_seed, int threads) {
        const auto q = law_of(law);
        const auto omega = disorder_of(disorder, disorder_seed);
        py::gil_scoped_release nogil;
        return simulate_endpoints(q, omega, frame_of(v0), std::move(checkpoints), replicas, seed, threads).x;
      },
      py::arg("law"), py::arg("disorder"), py::arg("v0"), py::arg("checkpoints"), py::arg("replicas"),
      py::arg("seed") = 1, py::arg("disorder_seed") = 1, py::arg("threads") = 1);
  m.def("empirical_cov", [](const Matrix& endpoints, std::size_t n) {
    return to_json(empirical_cov(endpoints, n), 0).dump();
  });
  m.def(
      "clt_from_endpoints",
      [](const Matrix& endpoints, std::size_t n, double sigma2, std::optional<Vector> center, double alpha) {
        return to_json(clt_from_endpoints(endpoints, n, sigma2, center, alpha)).dump();
      },
      py::arg("endpoints"), py::arg("n"), py::arg("sigma2"), py::arg("center") = std::nullopt, py::arg("alpha") = 0.01);

  m.def(
      "mixing_report",
      [](const std::string& law, const std::vector<int>& ks, int cutoff) {
        return mixing_report(law_of(law), ks, cutoff).to_json().dump();
      },
      py::arg("law"), py::arg("ks"), py::arg("cutoff") = 4096);
  m.def(
      "tv_to_haar_so2",
      [](const std::string& law, const std::vector<double>& omega_angles, int k) {
        const auto r = tv_to_haar_so2(law_of(law), omega_angles, k);
        return json{{"tv", r.tv}, {"truncation_bound", r.truncation_bound}, {"m_used", r.m_used}, {"grid", r.grid}}
            .dump();
      },
      py::arg("law"), py::arg("omega_angles"), py::arg("k"));
}
