#pragma once

#include <cstdint>
#include <vector>

#include "visaw/tensor.hpp"

namespace visaw {

// Differentiable ops over Tensor. Binary elementwise ops broadcast the
// second operand over leading axes when its shape is a trailing suffix of
// the first operand's shape (e.g. adding a [d] bias to an [n x d] matrix).
// Results are fresh nodes; inputs are never mutated.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);  // subgradient 0 at the kink
Tensor abs(const Tensor& a);   // subgradient 0 at the kink

Tensor matmul(const Tensor& a, const Tensor& b);  // rank-2 only
Tensor transpose(const Tensor& a);                // rank-2 only

// Softmax over the last axis with max-subtraction; rejects non-finite input.
Tensor softmax(const Tensor& a);

// Normalizes each slice along the last axis to zero mean and unit variance
// (population variance), then applies gain and bias (both shaped [d]).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps);

Tensor sum_all(const Tensor& a);   // -> scalar
Tensor mean_all(const Tensor& a);  // -> scalar
Tensor mean_rows(const Tensor& a); // [r x c] -> [c]
Tensor row(const Tensor& a, std::size_t index);  // [r x c] -> [c]
Tensor dot(const Tensor& a, const Tensor& b);    // rank-1 pair -> scalar

Tensor concat_cols(const std::vector<Tensor>& parts);  // along last axis
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len);
Tensor reshape(const Tensor& a, Shape shape);

// Gathers rows of `table` ([vocab x d]); gradient scatter-adds into the
// table, so repeated ids accumulate.
Tensor embedding_rows(const Tensor& table, const std::vector<std::size_t>& ids);

Tensor l2_normalize(const Tensor& v);  // rank-1; zero vector is an error

// Mean cross-entropy of softmax(logits) rows against integer targets.
// `mask`, when given, selects the rows that count; at least one row must.
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& targets,
                     const std::vector<std::uint8_t>* mask = nullptr);

}  // namespace visaw
