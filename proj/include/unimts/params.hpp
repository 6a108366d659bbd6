#pragma once

#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "unimts/diff/tensor.hpp"
#include "unimts/error.hpp"

namespace unimts {

/// Insertion-ordered named parameters with stable addresses.
template <class Real>
class ParameterStore {
 public:
  diff::Parameter<Real>& add(std::string name, diff::Tensor<Real> value) {
    if (find(name)) throw Error(ErrorKind::DuplicateId, "parameter '" + name + "' already exists");
    return params_.emplace_back(std::move(name), std::move(value));
  }

  diff::Parameter<Real>* find(std::string_view name) {
    for (auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }
  const diff::Parameter<Real>* find(std::string_view name) const {
    for (const auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }

  diff::Parameter<Real>& at(std::string_view name) {
    if (auto* p = find(name)) return *p;
    throw Error(ErrorKind::UnknownId, "no parameter named '" + std::string(name) + "'");
  }
  const diff::Parameter<Real>& at(std::string_view name) const {
    if (const auto* p = find(name)) return *p;
    throw Error(ErrorKind::UnknownId, "no parameter named '" + std::string(name) + "'");
  }

  bool contains(std::string_view name) const { return find(name) != nullptr; }

  std::vector<diff::Parameter<Real>*> all() {
    std::vector<diff::Parameter<Real>*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }

  std::vector<diff::Parameter<Real>*> with_prefix(std::string_view prefix) {
    std::vector<diff::Parameter<Real>*> out;
    for (auto& p : params_)
      if (std::string_view(p.name).substr(0, prefix.size()) == prefix) out.push_back(&p);
    return out;
  }

  const std::deque<diff::Parameter<Real>>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

 private:
  std::deque<diff::Parameter<Real>> params_;
};

}  // namespace unimts
