#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <string>
#include <vector>

#include "d2du/config.hpp"
#include "d2du/experiment.hpp"
#include "d2du/federated.hpp"
#include "d2du/link_allocator.hpp"
#include "d2du/outputs.hpp"
#include "d2du/price_net.hpp"
#include "d2du/wifi_model.hpp"

namespace py = pybind11;
using namespace d2du;

namespace {

std::vector<Override> to_overrides(const std::map<std::string, std::string>& kv) {
  std::vector<Override> out;
  for (const auto& [k, v] : kv) out.push_back({k, v});
  return out;
}

py::dict summary_dict(const RunSummary& s) {
  py::list links;
  for (const auto& l : s.links) {
    py::dict d;
    d["link"] = l.link;
    d["name"] = l.name;
    d["rate"] = l.rate;
    d["ett"] = l.ett;
    d["prices"] = l.prices;
    d["theta"] = l.theta;
    d["collision_slots"] = l.collision_slots;
    links.append(d);
  }
  py::list channels;
  for (const auto& c : s.channels) {
    py::dict d;
    d["load"] = c.load;
    d["wifi_fraction"] = c.wifi_fraction;
    d["mean_load"] = c.mean_load;
    d["conflicted_slots"] = c.conflicted_slots;
    d["guarantee_violations"] = c.guarantee_violations;
    channels.append(d);
  }
  py::dict out;
  out["scheme"] = s.scheme;
  out["slots"] = s.slots;
  out["window"] = s.window;
  out["total_throughput"] = s.total_throughput;
  out["ett_cv"] = s.ett_cv;
  out["convergence_slot"] = s.convergence_slot;
  out["federated_rounds"] = s.federated_rounds;
  out["links"] = links;
  out["channels"] = channels;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "LTE-U D2D pricing simulator";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<WifiPhyParams>(m, "WifiPhyParams")
      .def(py::init<>())
      .def_readwrite("cw_min", &WifiPhyParams::cw_min)
      .def_readwrite("max_backoff_stage", &WifiPhyParams::max_backoff_stage)
      .def_readwrite("slot_time", &WifiPhyParams::slot_time)
      .def_readwrite("sifs", &WifiPhyParams::sifs)
      .def_readwrite("difs", &WifiPhyParams::difs)
      .def_readwrite("header_time", &WifiPhyParams::header_time)
      .def_readwrite("ack_time", &WifiPhyParams::ack_time)
      .def_readwrite("payload_bits", &WifiPhyParams::payload_bits)
      .def_readwrite("data_rate", &WifiPhyParams::data_rate)
      .def_readwrite("propagation_delay", &WifiPhyParams::propagation_delay);

  py::class_<WifiPeak>(m, "WifiPeak")
      .def_readonly("n_max", &WifiPeak::n_max)
      .def_readonly("r_max_total", &WifiPeak::r_max_total)
      .def_readonly("r_hat_max", &WifiPeak::r_hat_max);

  m.def("bianchi_throughput", &bianchi_throughput, py::arg("n"), py::arg("phy") = WifiPhyParams{});
  m.def("throughput_curve", &throughput_curve, py::arg("phy") = WifiPhyParams{},
        py::arg("n_limit") = 64);
  m.def("find_peak", &find_peak, py::arg("phy") = WifiPhyParams{}, py::arg("n_limit") = 64);
  m.def(
      "channel_traffic_load",
      [](int n, const WifiPhyParams& phy, int n_limit) {
        const auto c = channel_traffic_load(n, phy, n_limit);
        return py::make_tuple(c.load, c.accessible);
      },
      py::arg("n"), py::arg("phy") = WifiPhyParams{}, py::arg("n_limit") = 64,
      "Returns (load, accessible).");

  py::class_<LinkConstraints>(m, "LinkConstraints")
      .def(py::init<>())
      .def_readwrite("total_power", &LinkConstraints::total_power)
      .def_readwrite("per_channel_power", &LinkConstraints::per_channel_power)
      .def_readwrite("money", &LinkConstraints::money);

  py::class_<LinkProblem>(m, "LinkProblem")
      .def(py::init<>())
      .def_readwrite("prices", &LinkProblem::prices)
      .def_readwrite("loads", &LinkProblem::loads)
      .def_readwrite("gains", &LinkProblem::gains)
      .def_readwrite("bandwidths", &LinkProblem::bandwidths)
      .def_readwrite("noise_psd", &LinkProblem::noise_psd)
      .def_readwrite("constraints", &LinkProblem::constraints)
      .def_readwrite("enforce_budget", &LinkProblem::enforce_budget);

  py::class_<Allocation>(m, "Allocation")
      .def_readonly("theta", &Allocation::theta)
      .def_readonly("eta", &Allocation::eta)
      .def_readonly("rate", &Allocation::rate)
      .def_readonly("infeasible", &Allocation::infeasible)
      .def("power", &Allocation::power)
      .def("money_spent",
           [](const Allocation& a, const std::vector<double>& prices) {
             return a.money_spent(prices);
           });

  m.def("solve_allocation", &solve_allocation, py::arg("problem"));
  m.def("brute_force_allocation", &brute_force_allocation, py::arg("problem"),
        py::arg("grid_resolution") = 101);
  m.def(
      "kkt_residual",
      [](const Allocation& a, const LinkProblem& p) { return kkt_residuals(a, p).max_residual(); },
      py::arg("allocation"), py::arg("problem"));

  py::class_<MlpParams>(m, "MlpParams")
      .def(py::init<>())
      .def_property_readonly_static("count", [](py::object) { return MlpParams::kCount; })
      .def("flatten",
           [](const MlpParams& p) {
             const auto f = p.flatten();
             return std::vector<double>(f.begin(), f.end());
           })
      .def_static("unflatten",
                  [](const std::vector<double>& v) { return MlpParams::unflatten(v); })
      .def("__eq__", [](const MlpParams& a, const MlpParams& b) { return a == b; });

  m.def("init_params", py::overload_cast<std::uint64_t>(&init_params), py::arg("seed"));
  m.def(
      "forward",
      [](const MlpParams& p, double link_load, double channel_load, double gain, double w_cap) {
        return forward(p, {link_load, channel_load, gain}, w_cap);
      },
      py::arg("params"), py::arg("link_load"), py::arg("channel_load"), py::arg("gain"),
      py::arg("w_cap") = 10.0);

  m.def(
      "average_params",
      [](const std::vector<MlpParams>& all) { return average_params(all); }, py::arg("params"));
  m.def("blend_factor", &blend_factor, py::arg("q_sum"), py::arg("gamma") = 1.2,
        py::arg("epsilon") = 0.4);
  m.def("apply_blend", &apply_blend, py::arg("own"), py::arg("snapshot"), py::arg("beta"));

  m.def(
      "manifest",
      [](const std::string& path, const std::map<std::string, std::string>& overrides) {
        return emit_manifest(load_config_file(path, to_overrides(overrides)));
      },
      py::arg("config"), py::arg("overrides") = std::map<std::string, std::string>{},
      "Fully resolved YAML for a scenario file.");

  m.def(
      "run",
      [](const std::string& path, const std::filesystem::path& out_dir,
         const std::map<std::string, std::string>& overrides) {
        const auto cfg = load_config_file(path, to_overrides(overrides));
        std::filesystem::create_directories(out_dir);
        RecordedRun run;
        {
          py::gil_scoped_release release;
          run = record_run(cfg, out_dir);
        }
        return summary_dict(run.summary);
      },
      py::arg("config"), py::arg("out_dir"),
      py::arg("overrides") = std::map<std::string, std::string>{},
      "Runs a scenario file, writing CSVs and a manifest to out_dir. Returns the summary.");
}
