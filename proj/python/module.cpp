#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "visaw/embedding.hpp"
#include "visaw/errors.hpp"
#include "visaw/gradcheck.hpp"
#include "visaw/ops.hpp"
#include "visaw/retrieval.hpp"
#include "visaw/tensor.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_core, m) {
  using namespace visaw;

  m.doc() = "joint text/image embedding, retrieval and fusion core";

  py::register_exception<Error>(m, "VisawError");

  py::class_<Tensor>(m, "Tensor")
      .def_static("zeros", &Tensor::zeros, py::arg("shape"), py::arg("requires_grad") = false)
      .def_static("full", &Tensor::full, py::arg("shape"), py::arg("value"),
                  py::arg("requires_grad") = false)
      .def_static("from_data", &Tensor::from_data, py::arg("shape"), py::arg("data"),
                  py::arg("requires_grad") = false)
      .def_static("scalar", &Tensor::scalar, py::arg("value"), py::arg("requires_grad") = false)
      .def_static("identity", &Tensor::identity, py::arg("n"))
      .def_property_readonly("shape", &Tensor::shape)
      .def_property_readonly("data", [](const Tensor& t) { return t.data(); })
      .def_property_readonly("grad", [](const Tensor& t) { return t.grad(); })
      .def_property_readonly("requires_grad", &Tensor::requires_grad)
      .def("set_requires_grad",
           [](Tensor& t, bool on) { t.set_requires_grad(on); }, py::arg("on") = true)
      .def("value", &Tensor::value)
      .def("backward", &Tensor::backward)
      .def("zero_grad", &Tensor::zero_grad)
      .def("detach", &Tensor::detach)
      .def("__repr__", [](const Tensor& t) {
        return t.defined() ? "Tensor" + shape_str(t.shape()) : "Tensor(undefined)";
      });

  m.def("add", &add);
  m.def("sub", &sub);
  m.def("mul", &mul);
  m.def("scale", &scale);
  m.def("add_scalar", &add_scalar);
  m.def("sigmoid", &sigmoid);
  m.def("tanh", &visaw::tanh);
  m.def("relu", &relu);
  m.def("abs", &visaw::abs);
  m.def("matmul", &matmul);
  m.def("transpose", &transpose);
  m.def("softmax", &softmax);
  m.def("layer_norm", &layer_norm, py::arg("x"), py::arg("gain"), py::arg("bias"),
        py::arg("eps") = 1e-6);
  m.def("sum_all", &sum_all);
  m.def("mean_all", &mean_all);
  m.def("mean_rows", &mean_rows);
  m.def("row", &row);
  m.def("dot", &dot);
  m.def("concat_cols", &concat_cols);
  m.def("slice_cols", &slice_cols);
  m.def("reshape", &reshape);
  m.def("embedding_rows", &embedding_rows);
  m.def("l2_normalize", &l2_normalize);
  m.def("cross_entropy",
        [](const Tensor& logits, const std::vector<std::size_t>& targets) {
          return cross_entropy(logits, targets);
        });

  m.def(
      "weldon_pool",
      [](const Tensor& regions, std::size_t k_plus, std::size_t k_minus, double beta) {
        return weldon_pool(regions, {k_plus, k_minus, beta});
      },
      py::arg("regions"), py::arg("k_plus") = 3, py::arg("k_minus") = 3, py::arg("beta") = 1.0);
  m.def("triplet_loss", &triplet_loss, py::arg("x"), py::arg("y"), py::arg("z"),
        py::arg("alpha") = 0.2);
  m.def("mine_hard_negative", &mine_hard_negative, py::arg("anchor"), py::arg("candidates"),
        py::arg("forbidden") = std::vector<std::size_t>{});

  py::class_<ImageIndex>(m, "ImageIndex")
      .def_property_readonly("ids", [](const ImageIndex& i) { return i.ids; })
      .def_property_readonly("dim", [](const ImageIndex& i) { return i.dim; })
      .def("__len__", &ImageIndex::size);
  py::class_<RetrievalResult>(m, "RetrievalResult")
      .def_property_readonly("entries", [](const RetrievalResult& r) { return r.entries; })
      .def_property_readonly("clipped", [](const RetrievalResult& r) { return r.clipped; });
  m.def("build_index", &build_index);
  m.def("retrieve_top_m", &retrieve_top_m, py::arg("query"), py::arg("index"), py::arg("m") = 8);
  m.def("recall_at_k", &recall_at_k);

  py::class_<GradCheckReport>(m, "GradCheckReport")
      .def_readonly("name", &GradCheckReport::name)
      .def_readonly("max_rel_err", &GradCheckReport::max_rel_err)
      .def_readonly("tolerance", &GradCheckReport::tolerance)
      .def_readonly("pass_", &GradCheckReport::pass);
  m.def("gradcheck_suite", &gradcheck_suite, py::arg("seed") = 0);

  m.def("grad_enabled", &grad_enabled);
  m.def("set_grad_enabled", &set_grad_enabled);
}
