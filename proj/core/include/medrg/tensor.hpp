// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace medrg {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A named trainable tensor. Modules own their parameters by value and expose
/// them through collect_parameters(), so a parameter list is always rebuilt
/// from the owning module rather than cached.
struct Parameter {
    std::string name;
    Matrix value;
    bool decay = true; // AdamW weight decay applies
};

using ParameterList = std::vector<Parameter *>;
using ConstParameterList = std::vector<const Parameter *>;

/// Per-parameter gradient buffers keyed by parameter address.
class Gradients {
  public:
    Matrix &at(const Parameter &p) {
        auto it = grads_.find(&p);
        if (it == grads_.end()) {
            it = grads_.emplace(&p, Matrix::Zero(p.value.rows(), p.value.cols())).first;
        }
        return it->second;
    }

    const Matrix *find(const Parameter &p) const {
        const auto it = grads_.find(&p);
        return it == grads_.end() ? nullptr : &it->second;
    }

    void clear() { grads_.clear(); }
    bool empty() const { return grads_.empty(); }

    /// this += scale * other, for every parameter in `order` (fixed summation order).
    void accumulate(const Gradients &other, const ParameterList &order, float scale = 1.0f) {
        for (const Parameter *p : order) {
            if (const Matrix *g = other.find(*p)) {
                at(*p) += scale * *g;
            }
        }
    }

  private:
    std::unordered_map<const Parameter *, Matrix> grads_;
};

} // namespace medrg
