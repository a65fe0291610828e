#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsp {

// Dense row-major tensor. S is float for training, double for the
// finite-difference harness and geometry-facing evaluation.
template <typename S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> shp) : shape(std::move(shp)) {
        data.assign(numel_of(shape), S(0));
    }
    Tensor(std::vector<int> shp, std::vector<S> values)
        : shape(std::move(shp)), data(std::move(values)) {
        if (data.size() != numel_of(shape))
            throw std::invalid_argument("tensor: data length does not match shape");
    }

    static size_t numel_of(const std::vector<int>& shp) {
        size_t n = 1;
        for (int d : shp) {
            if (d < 0) throw std::invalid_argument("tensor: negative dimension");
            n *= size_t(d);
        }
        return n;
    }

    size_t numel() const { return data.size(); }
    int dim(int i) const { return shape[size_t(i)]; }
    int rank() const { return int(shape.size()); }

    int rows() const { return rank() == 1 ? 1 : shape[0]; }
    int cols() const { return rank() == 1 ? shape[0] : shape[1]; }

    S& at(int i, int j) { return data[size_t(i) * size_t(cols()) + size_t(j)]; }
    S at(int i, int j) const { return data[size_t(i) * size_t(cols()) + size_t(j)]; }
    S& operator[](size_t i) { return data[i]; }
    S operator[](size_t i) const { return data[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (S v : data)
            if (!std::isfinite(double(v))) return false;
        return true;
    }

    template <typename T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = T(data[i]);
        return out;
    }
};

inline std::string shape_str(const std::vector<int>& s) {
    std::string r = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) r += "x";
        r += std::to_string(s[i]);
    }
    return r + "]";
}

// Named parameter set. Slot order is stable and defines both the gradient
// buffer layout and the checkpoint serialization order.
template <typename S>
struct ParamStore {
    struct Entry {
        std::string name;
        Tensor<S> value;
    };
    std::vector<Entry> entries;

    int add(std::string name, Tensor<S> t) {
        entries.push_back({std::move(name), std::move(t)});
        return int(entries.size()) - 1;
    }
    Tensor<S>& operator[](int slot) { return entries[size_t(slot)].value; }
    const Tensor<S>& operator[](int slot) const { return entries[size_t(slot)].value; }
    int count() const { return int(entries.size()); }

    size_t total_scalars() const {
        size_t n = 0;
        for (const auto& e : entries) n += e.value.numel();
        return n;
    }
};

// Gradient accumulator aligned with a ParamStore.
template <typename S>
struct GradBuffer {
    std::vector<Tensor<S>> grads;

    explicit GradBuffer(const ParamStore<S>& ps) {
        grads.reserve(size_t(ps.count()));
        for (const auto& e : ps.entries) grads.emplace_back(e.value.shape);
    }
    void zero() {
        for (auto& g : grads)
            for (S& v : g.data) v = S(0);
    }
    void add(const GradBuffer& o) {
        for (size_t i = 0; i < grads.size(); ++i) {
            auto& a = grads[i].data;
            const auto& b = o.grads[i].data;
            for (size_t k = 0; k < a.size(); ++k) a[k] += b[k];
        }
    }
    void scale(S s) {
        for (auto& g : grads)
            for (S& v : g.data) v *= s;
    }
    bool all_finite() const {
        for (const auto& g : grads)
            if (!g.all_finite()) return false;
        return true;
    }
};

} // namespace bsp
