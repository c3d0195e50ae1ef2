#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "grn/error.hpp"

namespace grn {

// Dense row-major n-d array of doubles with an optional gradient buffer.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty or same length as data

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(numel(shape), 0.0);
    }
    Tensor(std::vector<int> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (int64_t(data.size()) != numel(shape))
            fail(ErrorKind::Dimension, "tensor data length does not match shape");
    }

    static int64_t numel(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d <= 0) fail(ErrorKind::Dimension, "non-positive tensor dimension");
            n *= d;
        }
        return n;
    }

    int64_t size() const { return int64_t(data.size()); }
    int dim(int i) const { return shape[size_t(i)]; }
    int ndim() const { return int(shape.size()); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
    void zero_grad() {
        grad.assign(data.size(), 0.0);
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::ostringstream os;
        os << '(';
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << ')';
        return os.str();
    }
};

inline void require_shape(const Tensor& t, const std::vector<int>& s, const char* what) {
    if (t.shape != s) {
        Tensor probe;  // just for formatting
        probe.shape = s;
        fail(ErrorKind::Dimension,
             std::string(what) + ": expected shape " + probe.shape_str() + ", got " + t.shape_str());
    }
}

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace grn
