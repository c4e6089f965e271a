#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "fixsal/cli.hpp"
#include "fixsal/errors.hpp"
#include "fixsal/gradcheck.hpp"
#include "fixsal/iimc.hpp"
#include "fixsal/metrics.hpp"
#include "fixsal/pse.hpp"
#include "fixsal/scenegen.hpp"
#include "fixsal/slq.hpp"

namespace py = pybind11;
using fixsal::Tensor;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  std::vector<std::size_t> dims(a.shape(), a.shape() + a.ndim());
  return Tensor(dims, std::vector<float>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.dims().begin(), t.dims().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

py::dict frame_dict(const fixsal::FrameSample& f) {
  py::dict d;
  d["features"] = to_array(f.features);
  d["gt_mask"] = to_array(f.gt_mask);
  d["scribble_fg"] = to_array(f.scribble_fg);
  d["scribble_bg"] = to_array(f.scribble_bg);
  d["fixation"] = to_array(f.fixation);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "fixsal core bindings";

  py::register_exception<fixsal::ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<fixsal::NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<fixsal::DegenerateInputError>(m, "DegenerateInputError", PyExc_ValueError);
  py::register_exception<fixsal::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("positional_encoding_2d",
        [](double x, double y, std::size_t d) { return to_array(fixsal::positional_encoding_2d(x, y, d)); },
        py::arg("x"), py::arg("y"), py::arg("d"));
  m.def("fixation_centroid", [](const Array& f) {
    const auto c = fixsal::fixation_centroid(to_tensor(f));
    return py::make_tuple(c.x, c.y);
  });
  m.def("partial_iou", [](const Array& pred, const Array& scr) {
    return fixsal::partial_iou(to_tensor(pred), to_tensor(scr));
  });
  m.def("mae", [](const Array& p, const Array& g) { return fixsal::mae(to_tensor(p), to_tensor(g)); });
  m.def("f_measure", [](const Array& p, const Array& g) { return fixsal::f_measure(to_tensor(p), to_tensor(g)); });
  m.def("s_measure", [](const Array& p, const Array& g) { return fixsal::s_measure(to_tensor(p), to_tensor(g)); });

  m.def(
      "intra_loss",
      [](const Array& kf, const Array& kb, const Array& rf, const Array& rb, const std::vector<Array>& bank,
         double tau) {
        fixsal::ContrastiveBatch b{to_tensor(kf), to_tensor(kb), to_tensor(rf), to_tensor(rb), {}, tau};
        for (const auto& a : bank) b.bank_negatives.push_back(to_tensor(a));
        return fixsal::intra_loss(b).loss;
      },
      py::arg("key_fg"), py::arg("key_bg"), py::arg("ref_fg"), py::arg("ref_bg"),
      py::arg("bank") = std::vector<Array>{}, py::arg("tau") = fixsal::kDefaultTemperature);
  m.def(
      "inter_loss",
      [](const Array& anchor, const std::vector<Array>& pos, const std::vector<Array>& neg, double tau) {
        std::vector<Tensor> p, n;
        for (const auto& a : pos) p.push_back(to_tensor(a));
        for (const auto& a : neg) n.push_back(to_tensor(a));
        return fixsal::inter_loss(to_tensor(anchor), p, n, tau).loss;
      },
      py::arg("anchor"), py::arg("positives"), py::arg("negatives"), py::arg("tau") = fixsal::kDefaultTemperature);

  m.def(
      "generate_scene",
      [](std::size_t height, std::size_t width, std::size_t channels, std::size_t frames, std::uint64_t seed) {
        fixsal::SceneConfig cfg;
        cfg.height = height;
        cfg.width = width;
        cfg.channels = channels;
        cfg.frames_per_video = frames;
        cfg.seed = seed;
        py::list out;
        for (const auto& f : fixsal::generate_scene(cfg).frames) out.append(frame_dict(f));
        return out;
      },
      py::arg("height") = 32, py::arg("width") = 32, py::arg("channels") = 64, py::arg("frames") = 12,
      py::arg("seed") = 0);

  m.def(
      "gradcheck",
      [](std::uint64_t seed, std::size_t instances, float eps) {
        fixsal::GradcheckOptions o;
        o.seed = seed;
        o.instances = instances;
        o.eps = eps;
        py::dict worst;
        bool ok = true;
        for (const auto& e : fixsal::run_gradcheck(o)) {
          const double prev = worst.contains(e.loss) ? worst[py::str(e.loss)].cast<double>() : 0.0;
          worst[py::str(e.loss)] = std::max(prev, e.check.worst_error);
          ok = ok && e.check.passed;
        }
        return py::make_tuple(ok, worst);
      },
      py::arg("seed") = 0, py::arg("instances") = 1, py::arg("eps") = 1e-3f);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = fixsal::run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
