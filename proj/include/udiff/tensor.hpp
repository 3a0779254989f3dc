#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace udiff {

template <typename Scalar>
struct Tensor {
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<Scalar, Eigen::aligned_allocator<Scalar>> data;

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
    bool operator==(const Tensor&) const = default;
};

/// Ordered collection of named dense tensors (parameters, gradients, moments).
template <typename Scalar>
class ParamSet {
public:
    Tensor<Scalar>& add(std::string name, std::vector<std::int64_t> shape, Scalar fill = Scalar(0)) {
        if (index_.contains(name)) throw std::invalid_argument("duplicate tensor name: " + name);
        Tensor<Scalar> t{std::move(name), std::move(shape), {}};
        t.data.assign(static_cast<std::size_t>(t.numel()), fill);
        index_.emplace(t.name, tensors_.size());
        tensors_.push_back(std::move(t));
        return tensors_.back();
    }

    std::size_t size() const { return tensors_.size(); }
    bool empty() const { return tensors_.empty(); }
    auto begin() { return tensors_.begin(); }
    auto end() { return tensors_.end(); }
    auto begin() const { return tensors_.begin(); }
    auto end() const { return tensors_.end(); }
    Tensor<Scalar>& operator[](std::size_t i) { return tensors_[i]; }
    const Tensor<Scalar>& operator[](std::size_t i) const { return tensors_[i]; }

    bool contains(std::string_view name) const { return index_.find(std::string(name)) != index_.end(); }
    std::size_t index_of(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw std::out_of_range("no tensor named " + std::string(name));
        return it->second;
    }
    Tensor<Scalar>& get(std::string_view name) { return tensors_[index_of(name)]; }
    const Tensor<Scalar>& get(std::string_view name) const { return tensors_[index_of(name)]; }

    /// Same names and shapes, every entry zero.
    ParamSet zeros_like() const {
        ParamSet out;
        for (const auto& t : tensors_) out.add(t.name, t.shape);
        return out;
    }

    template <typename Other>
    ParamSet<Other> cast() const {
        ParamSet<Other> out;
        for (const auto& t : tensors_) {
            auto& dst = out.add(t.name, t.shape);
            for (std::size_t i = 0; i < t.data.size(); ++i) dst.data[i] = static_cast<Other>(t.data[i]);
        }
        return out;
    }

    bool same_layout(const ParamSet& other) const {
        if (other.size() != size()) return false;
        for (std::size_t i = 0; i < size(); ++i)
            if (tensors_[i].name != other[i].name || tensors_[i].shape != other[i].shape) return false;
        return true;
    }

    bool operator==(const ParamSet& other) const { return tensors_ == other.tensors_; }

private:
    std::vector<Tensor<Scalar>> tensors_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

/// Sum of element counts over all tensors.
template <typename Scalar>
std::int64_t count_params(const ParamSet<Scalar>& params) {
    std::int64_t n = 0;
    for (const auto& t : params) n += t.numel();
    return n;
}

}  // namespace udiff
