// Python bindings for the re-label distillation pipeline.

#include "rld/cli.hpp"
#include "rld/dataio.hpp"
#include "rld/explain.hpp"
#include "rld/metrics.hpp"
#include "rld/numkit.hpp"
#include "rld/teacher.hpp"
#include "rld/vae.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <utility>
#include <vector>

namespace py = pybind11;
using namespace rld;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

DenseTensor tensor_from(const FloatArray& a) {
    std::vector<std::size_t> shape(static_cast<std::size_t>(a.ndim()));
    for (py::ssize_t i = 0; i < a.ndim(); ++i)
        shape[static_cast<std::size_t>(i)] = static_cast<std::size_t>(a.shape(i));
    return DenseTensor(std::move(shape),
                       std::vector<float>(a.data(), a.data() + a.size()));
}

py::array_t<float> numpy_from(const DenseTensor& t) {
    std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<float> out(shape);
    std::copy(t.data.begin(), t.data.end(), out.mutable_data());
    return out;
}

ImageShape shape_from_array(const FloatArray& a, const char* what) {
    if (a.ndim() == 2)
        return ImageShape{static_cast<std::size_t>(a.shape(0)),
                          static_cast<std::size_t>(a.shape(1)), 1};
    if (a.ndim() == 3)
        return ImageShape{static_cast<std::size_t>(a.shape(0)),
                          static_cast<std::size_t>(a.shape(1)),
                          static_cast<std::size_t>(a.shape(2))};
    throw ShapeError(std::string(what) + ": expected a 2-d (h, w) or 3-d (h, w, c) image");
}

DenseTensor flat_anchor(const FloatArray& a) {
    DenseTensor t = tensor_from(a);
    t.shape = {t.size()};
    return t;
}

py::array_t<double> points_array(const std::vector<std::pair<double, double>>& points) {
    py::array_t<double> out({static_cast<py::ssize_t>(points.size()), py::ssize_t(2)});
    auto view = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < points.size(); ++i) {
        view(static_cast<py::ssize_t>(i), 0) = points[i].first;
        view(static_cast<py::ssize_t>(i), 1) = points[i].second;
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "re-label distillation: local linear explanations distilled from a classifier";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ParamError>(m, "ParamError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
    py::register_exception<TrainError>(m, "TrainError", PyExc_RuntimeError);

    py::class_<ImageDataset>(m, "Dataset")
        .def_property_readonly("images",
                               [](const ImageDataset& d) { return numpy_from(d.images); })
        .def_readonly("labels", &ImageDataset::labels)
        .def_readonly("num_classes", &ImageDataset::num_classes)
        .def("__len__", &ImageDataset::count)
        .def("image",
             [](const ImageDataset& d, std::size_t i) { return numpy_from(d.image(i)); },
             py::arg("i"), "Flattened float32 pixels of image i.")
        .def_property_readonly("shape", [](const ImageDataset& d) {
            const ImageShape s = d.shape();
            return py::make_tuple(s.h, s.w, s.c);
        });

    m.def(
        "synth_shapes",
        [](std::size_t n, std::size_t h, std::size_t w, int k, std::uint64_t seed) {
            Rng rng(seed);
            return synth_shapes(n, h, w, k, rng);
        },
        py::arg("n"), py::arg("h"), py::arg("w"), py::arg("k"), py::arg("seed") = 0,
        "Noisy grayscale shapes dataset with k interleaved classes.");
    m.def("load_idx", &load_idx, py::arg("images_path"), py::arg("labels_path"));
    m.def("write_idx", &write_idx, py::arg("dataset"), py::arg("images_path"),
          py::arg("labels_path"));
    m.def(
        "write_pgm",
        [](const FloatArray& map, const std::string& path) {
            DenseTensor t = tensor_from(map);
            if (t.rank() != 2) throw ShapeError("write_pgm: expected a 2-d map");
            write_pgm(t, path);
        },
        py::arg("map"), py::arg("path"), "Binary PGM of an h x w map with values in [0, 1].");

    py::class_<VaeModel>(m, "Vae")
        .def_readonly("epochs_trained", &VaeModel::epochs_trained)
        .def_readonly("final_loss", &VaeModel::final_loss)
        .def_readonly("epoch_losses", &VaeModel::epoch_losses)
        .def_property_readonly("latent_dim", [](const VaeModel& v) { return v.latent_dim; })
        .def("encode",
             [](const VaeModel& v, const FloatArray& x) {
                 const LatentStats s = encode(v, flat_anchor(x));
                 return py::make_tuple(numpy_from(s.mu), numpy_from(s.logvar));
             },
             py::arg("x"), "Posterior (mu, logvar) of one image.")
        .def("decode",
             [](const VaeModel& v, const FloatArray& z) {
                 return numpy_from(decode(v, tensor_from(z)));
             },
             py::arg("z"))
        .def("sample_neighborhood",
             [](const VaeModel& v, const FloatArray& anchor, std::size_t n, float tau,
                std::uint64_t seed) {
                 Rng rng(seed);
                 const std::vector<DenseTensor> samples =
                     sample_neighborhood(v, flat_anchor(anchor), n, tau, rng);
                 const std::size_t dim = samples.empty() ? 0 : samples[0].size();
                 py::array_t<float> out(
                     {static_cast<py::ssize_t>(samples.size()), static_cast<py::ssize_t>(dim)});
                 float* dst = out.mutable_data();
                 for (const DenseTensor& s : samples)
                     dst = std::copy(s.data.begin(), s.data.end(), dst);
                 return out;
             },
             py::arg("anchor"), py::arg("n"), py::arg("tau") = 1.0f, py::arg("seed") = 0,
             "n decoded latent perturbations of the anchor, one row each.")
        .def("save",
             [](const VaeModel& v, const std::string& path) {
                 save_model(vae_to_archive(v), path);
             },
             py::arg("path"))
        .def_static("load",
                    [](const std::string& path) { return vae_from_archive(load_model(path)); },
                    py::arg("path"));

    m.def(
        "train_vae",
        [](const ImageDataset& data, std::size_t latent_dim, std::size_t hidden_dim,
           std::size_t epochs, std::size_t batch_size, float lr, std::uint64_t seed) {
            VaeConfig config{latent_dim, hidden_dim, epochs, batch_size, lr};
            Rng rng(seed);
            return train_vae(data, config, rng);
        },
        py::arg("dataset"), py::arg("latent_dim") = 16, py::arg("hidden_dim") = 128,
        py::arg("epochs") = 30, py::arg("batch_size") = 64, py::arg("lr") = 1e-3f,
        py::arg("seed") = 0);

    py::class_<TeacherModel>(m, "Teacher")
        .def_readonly("input_dim", &TeacherModel::input_dim)
        .def_readonly("num_classes", &TeacherModel::num_classes)
        .def_readonly("train_accuracy", &TeacherModel::train_accuracy)
        .def_readonly("epoch_losses", &TeacherModel::epoch_losses)
        .def("predict",
             [](const TeacherModel& t, const FloatArray& x) { return predict(t, flat_anchor(x)); },
             py::arg("x"))
        .def("predict_proba",
             [](const TeacherModel& t, const FloatArray& x) {
                 return numpy_from(predict_proba(t, flat_anchor(x)));
             },
             py::arg("x"))
        .def("save",
             [](const TeacherModel& t, const std::string& path) {
                 save_model(teacher_to_archive(t), path);
             },
             py::arg("path"))
        .def_static("load",
                    [](const std::string& path) {
                        return teacher_from_archive(load_model(path));
                    },
                    py::arg("path"));

    m.def(
        "train_teacher",
        [](const ImageDataset& data, std::size_t hidden_dim, std::size_t epochs,
           std::size_t batch_size, float lr, std::uint64_t seed) {
            TeacherConfig config{hidden_dim, epochs, batch_size, lr};
            Rng rng(seed);
            return train_teacher(data, config, rng);
        },
        py::arg("dataset"), py::arg("hidden_dim") = 128, py::arg("epochs") = 40,
        py::arg("batch_size") = 64, py::arg("lr") = 0.1f, py::arg("seed") = 0);

    py::class_<SaliencyMap>(m, "Saliency")
        .def_property_readonly("raw", [](const SaliencyMap& s) { return numpy_from(s.raw); })
        .def_property_readonly("normalized",
                               [](const SaliencyMap& s) { return numpy_from(s.normalized); })
        .def_readonly("ordering", &SaliencyMap::ordering);

    py::class_<ExplainResult>(m, "ExplainResult")
        .def_property_readonly("saliency", [](const ExplainResult& r) { return r.saliency; })
        .def_property_readonly("weights",
                               [](const ExplainResult& r) { return numpy_from(r.student.w); })
        .def_property_readonly("bias", [](const ExplainResult& r) { return r.student.b; })
        .def_property_readonly("final_loss",
                               [](const ExplainResult& r) { return r.student.final_loss; })
        .def_property_readonly(
            "relabel_accuracy",
            [](const ExplainResult& r) { return r.student.relabel_accuracy; })
        .def_property_readonly("anchor_class",
                               [](const ExplainResult& r) { return r.neighborhood.anchor_class; })
        .def_property_readonly("tau_used",
                               [](const ExplainResult& r) { return r.neighborhood.tau_used; })
        .def_property_readonly(
            "kept_count", [](const ExplainResult& r) { return r.neighborhood.count_label(1); })
        .def_property_readonly(
            "shifted_count", [](const ExplainResult& r) { return r.neighborhood.count_label(0); })
        .def_readonly("retries", &ExplainResult::retries)
        .def_readonly("degenerate_warning", &ExplainResult::degenerate_warning);

    m.def(
        "explain",
        [](const TeacherModel& teacher, const VaeModel& vae, const FloatArray& anchor,
           std::size_t n_samples, float tau, float lambda1, float lambda2, std::uint64_t seed) {
            const ImageShape shape = shape_from_array(anchor, "explain");
            ExplainConfig config;
            config.n_samples = n_samples;
            config.tau = tau;
            config.student.lambda1 = lambda1;
            config.student.lambda2 = lambda2;
            Rng rng(seed);
            return explain(teacher, vae, flat_anchor(anchor), shape, config, rng);
        },
        py::arg("teacher"), py::arg("vae"), py::arg("anchor"), py::arg("n_samples") = 1000,
        py::arg("tau") = 1.0f, py::arg("lambda1") = 0.7f, py::arg("lambda2") = 0.3f,
        py::arg("seed") = 0,
        "Saliency for the teacher's prediction on a 2-d (h, w) anchor image.");

    m.def(
        "deletion_curve",
        [](const TeacherModel& teacher, const FloatArray& anchor,
           const std::vector<std::size_t>& ordering, double step_fraction, float baseline) {
            const ImageShape shape = shape_from_array(anchor, "deletion_curve");
            const PerturbationCurve c =
                deletion_curve(teacher, flat_anchor(anchor), shape, ordering, step_fraction,
                               baseline);
            return py::make_tuple(points_array(c.points), c.auc);
        },
        py::arg("teacher"), py::arg("anchor"), py::arg("ordering"),
        py::arg("step_fraction") = 0.02, py::arg("baseline") = 0.0f,
        "Returns (points, auc); points[:, 0] is the replaced fraction.");
    m.def(
        "insertion_curve",
        [](const TeacherModel& teacher, const FloatArray& anchor,
           const std::vector<std::size_t>& ordering, double step_fraction, float baseline) {
            const ImageShape shape = shape_from_array(anchor, "insertion_curve");
            const PerturbationCurve c =
                insertion_curve(teacher, flat_anchor(anchor), shape, ordering, step_fraction,
                                baseline);
            return py::make_tuple(points_array(c.points), c.auc);
        },
        py::arg("teacher"), py::arg("anchor"), py::arg("ordering"),
        py::arg("step_fraction") = 0.02, py::arg("baseline") = 0.0f);
    m.def(
        "occlusion_saliency",
        [](const TeacherModel& teacher, const FloatArray& anchor, std::size_t window,
           std::size_t stride, float baseline) {
            const ImageShape shape = shape_from_array(anchor, "occlusion_saliency");
            return occlusion_saliency(teacher, flat_anchor(anchor), shape, window, stride,
                                      baseline);
        },
        py::arg("teacher"), py::arg("anchor"), py::arg("window") = 5, py::arg("stride") = 1,
        py::arg("baseline") = 0.0f);
    m.def(
        "random_ordering",
        [](std::size_t h, std::size_t w, std::uint64_t seed) {
            Rng rng(seed);
            return random_ordering(h, w, rng);
        },
        py::arg("h"), py::arg("w"), py::arg("seed") = 0);
    m.def("auc_trapezoid",
          [](const std::vector<std::pair<double, double>>& points) {
              return auc_trapezoid(points);
          },
          py::arg("points"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = run_cli(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one CLI subcommand in-process; returns (code, stdout, stderr).");
}
