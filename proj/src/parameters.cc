#include "lmstyle/parameters.h"

#include "lmstyle/errors.h"

namespace lmstyle {

Parameter& ParameterSet::add(const std::string& name, Tensor init) {
  LMS_REQUIRE(!by_name_.count(name), "duplicate parameter name " + name);
  order_.push_back(std::make_unique<Parameter>(name, std::move(init)));
  Parameter* p = order_.back().get();
  by_name_[name] = p;
  return *p;
}

Parameter& ParameterSet::add_uniform(const std::string& name, Shape shape, double scale,
                                     std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = (2.0 * uniform01(rng) - 1.0) * scale;
  return add(name, std::move(t));
}

Parameter& ParameterSet::add_zeros(const std::string& name, Shape shape) {
  return add(name, Tensor(std::move(shape), 0.0));
}

Parameter* ParameterSet::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

Parameter& ParameterSet::at(const std::string& name) {
  Parameter* p = find(name);
  LMS_REQUIRE(p != nullptr, "no parameter named " + name);
  return *p;
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  out.reserve(order_.size());
  for (auto& p : order_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  out.reserve(order_.size());
  for (const auto& p : order_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParameterSet::with_prefix(const std::string& prefix) {
  std::vector<Parameter*> out;
  for (auto& p : order_) {
    if (p->name.compare(0, prefix.size(), prefix) == 0) out.push_back(p.get());
  }
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& p : order_) p->zero_grad();
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
  for (auto& p : order_) {
    const Parameter* src = other.find(p->name);
    LMS_REQUIRE(src != nullptr, "missing parameter " + p->name);
    LMS_REQUIRE(src->value.same_shape(p->value), "shape mismatch for " + p->name);
    p->value = src->value;
  }
}

}  // namespace lmstyle
