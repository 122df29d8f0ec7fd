#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cdstore/analytics.hpp"
#include "cdstore/caont.hpp"
#include "cdstore/chunker.hpp"
#include "cdstore/client.hpp"
#include "cdstore/error.hpp"
#include "cdstore/rs_codec.hpp"
#include "cdstore/simharness.hpp"

namespace py = pybind11;
using namespace cdstore;

namespace {

Bytes to_bytes(const py::bytes& b) {
  const std::string_view s = b;
  return Bytes(s.begin(), s.end());
}

py::bytes to_py(ByteView b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

std::vector<ShareSlice> to_slices(const std::vector<std::pair<int, py::bytes>>& shares) {
  std::vector<ShareSlice> out;
  out.reserve(shares.size());
  for (const auto& [index, data] : shares) out.push_back({index, to_bytes(data)});
  return out;
}

std::vector<std::pair<int, py::bytes>> from_slices(const std::vector<ShareSlice>& slices) {
  std::vector<std::pair<int, py::bytes>> out;
  out.reserve(slices.size());
  for (const auto& s : slices) out.emplace_back(s.index, to_py(s.data));
  return out;
}

}  // namespace

PYBIND11_MODULE(_cdstore, m) {
  m.doc() = "Convergent dispersal storage: CAONT-RS codec, chunking, analytics and a local cluster harness.";

  static py::exception<Error> error(m, "CdstoreError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(errc_name(e.code())) + ": " + e.what()).c_str());
    }
  });

  py::class_<CodingParams>(m, "CodingParams")
      .def(py::init([](int n, int k) {
             CodingParams p{n, k};
             p.validate();
             return p;
           }),
           py::arg("n") = 4, py::arg("k") = 3)
      .def_readonly("n", &CodingParams::n)
      .def_readonly("k", &CodingParams::k)
      .def("__repr__", [](const CodingParams& p) {
        return "CodingParams(n=" + std::to_string(p.n) + ", k=" + std::to_string(p.k) + ")";
      });

  m.def("share_size", &share_size_for, py::arg("size"), py::arg("k"));

  m.def(
      "encode",
      [](const py::bytes& secret, const CodingParams& params, const py::bytes& salt) {
        return from_slices(encode_secret(to_bytes(secret), params, to_bytes(salt)));
      },
      py::arg("secret"), py::arg("params") = CodingParams{}, py::arg("salt") = py::bytes(),
      "Disperses a secret into n (index, share) pairs.");

  m.def(
      "decode",
      [](const std::vector<std::pair<int, py::bytes>>& shares, std::size_t size, const CodingParams& params,
         const py::bytes& salt) {
        const auto slices = to_slices(shares);
        return to_py(decode_secret(slices, size, params, to_bytes(salt)).data);
      },
      py::arg("shares"), py::arg("size"), py::arg("params") = CodingParams{}, py::arg("salt") = py::bytes(),
      "Recovers a secret from at least k (index, share) pairs, trying other subsets on integrity failure.");

  m.def(
      "chunk",
      [](const py::bytes& data, std::size_t avg, std::size_t min, std::size_t max) {
        ChunkParams params;
        params.avg = avg;
        params.min = min;
        params.max = max;
        const auto input = to_bytes(data);
        std::vector<std::size_t> sizes;
        for (const auto& c : chunk_stream(input, params)) sizes.push_back(c.size());
        return sizes;
      },
      py::arg("data"), py::arg("avg") = 8192, py::arg("min") = 2048, py::arg("max") = 16384,
      "Content-defined chunk lengths of `data`.");

  py::class_<analytics::EpochStats>(m, "EpochStats")
      .def_readonly("epoch", &analytics::EpochStats::epoch)
      .def_readonly("chunks", &analytics::EpochStats::chunks)
      .def_readonly("logical_data", &analytics::EpochStats::logical_data)
      .def_readonly("logical_shares", &analytics::EpochStats::logical_shares)
      .def_readonly("transferred_shares", &analytics::EpochStats::transferred_shares)
      .def_readonly("physical_shares", &analytics::EpochStats::physical_shares)
      .def_property_readonly("intra_saving", &analytics::EpochStats::intra_saving)
      .def_property_readonly("inter_saving", &analytics::EpochStats::inter_saving);

  py::class_<analytics::TraceAnalysis>(m, "TraceAnalysis")
      .def_readonly("epochs", &analytics::TraceAnalysis::epochs)
      .def_readonly("total", &analytics::TraceAnalysis::total)
      .def("__str__", &analytics::format_analysis);

  m.def(
      "analyze_trace",
      [](const std::string& text, const CodingParams& params) {
        return analytics::analyze_trace(analytics::BackupTrace::parse(text), params);
      },
      py::arg("text"), py::arg("params") = CodingParams{});

  py::class_<analytics::CostReport>(m, "CostReport")
      .def_readonly("single_total_usd", &analytics::CostReport::single_total_usd)
      .def_readonly("aont_total_usd", &analytics::CostReport::aont_total_usd)
      .def_readonly("cdstore_total_usd", &analytics::CostReport::cdstore_total_usd)
      .def_readonly("cdstore_vm_usd", &analytics::CostReport::cdstore_vm_usd)
      .def_readonly("vm_instance", &analytics::CostReport::vm_instance)
      .def_readonly("saving_vs_single", &analytics::CostReport::saving_vs_single)
      .def_readonly("saving_vs_aont", &analytics::CostReport::saving_vs_aont)
      .def("__str__", &analytics::format_cost);

  m.def(
      "estimate_cost",
      [](double weekly_tb, double dedup_ratio, int weeks, const std::string& pricing, const CodingParams& params) {
        return analytics::estimate_cost(weekly_tb, dedup_ratio, weeks, params,
                                        analytics::PricingModel::parse(pricing));
      },
      py::arg("weekly_tb"), py::arg("dedup_ratio"), py::arg("weeks"), py::arg("pricing"),
      py::arg("params") = CodingParams{}, "Monthly cost comparison; `pricing` is the text of a pricing file.");

  m.def(
      "run_scenario",
      [](const std::string& text) {
        const auto report = [&] {
          py::gil_scoped_release release;
          return sim::run_scenario(sim::Scenario::parse(text));
        }();
        return py::make_tuple(report.passed(), sim::format_report(report));
      },
      py::arg("text"), "Runs a scenario against a local cluster; returns (passed, report text).");

  py::class_<Client>(m, "Client")
      .def(py::init([](const std::filesystem::path& config) { return std::make_unique<Client>(ClientConfig::load(config)); }),
           py::arg("config"))
      .def(
          "backup",
          [](Client& c, const std::filesystem::path& file, const std::string& pathname) {
            py::gil_scoped_release release;
            const auto r = c.backup(file, pathname);
            return r.total_transferred_share_bytes();
          },
          py::arg("file"), py::arg("pathname") = "", "Backs up a file; returns share bytes transferred.")
      .def(
          "restore",
          [](Client& c, const std::string& pathname, const std::filesystem::path& out) {
            py::gil_scoped_release release;
            return c.restore(pathname, out).bytes;
          },
          py::arg("pathname"), py::arg("out"), "Restores a file; returns bytes written.");
}
