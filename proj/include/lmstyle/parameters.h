#ifndef LMSTYLE_PARAMETERS_H_
#define LMSTYLE_PARAMETERS_H_

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "lmstyle/tensor.h"

namespace lmstyle {

// A named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape(), 0.0) {}
  void zero_grad() { grad.fill(0.0); }
};

// Owns parameters in creation order. Addresses are stable for the lifetime
// of the set, so models keep raw Parameter pointers into it.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& add(const std::string& name, Tensor init);
  // Weight matrix drawn from uniform(-scale, scale).
  Parameter& add_uniform(const std::string& name, Shape shape, double scale, std::mt19937_64& rng);
  Parameter& add_zeros(const std::string& name, Shape shape);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  // Parameters whose name starts with the given prefix, in creation order.
  std::vector<Parameter*> with_prefix(const std::string& prefix);

  size_t size() const { return order_.size(); }
  void zero_grad();
  // Copies values from another set with the same names and shapes.
  void copy_values_from(const ParameterSet& other);

 private:
  std::vector<std::unique_ptr<Parameter>> order_;
  std::map<std::string, Parameter*> by_name_;
};

// Uniform draw in [0, 1) from the top 53 bits of a 64-bit engine output.
// Spelled out so streams are identical across standard library vendors.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// splitmix64 finalizer used to derive independent seeds from a base seed.
inline uint64_t mix_seed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  return mix_seed(mix_seed(mix_seed(mix_seed(base) ^ a) ^ b) ^ c);
}

}  // namespace lmstyle

#endif  // LMSTYLE_PARAMETERS_H_
