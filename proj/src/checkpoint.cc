#include "lmstyle/checkpoint.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lmstyle/errors.h"

namespace lmstyle {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'L', 'M', 'S', 'C'};

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void str(const std::string& s) {
    pod<uint32_t>(static_cast<uint32_t>(s.size()));
    out_.append(s);
  }
  void tensor(const Tensor& t) {
    pod<uint8_t>(static_cast<uint8_t>(DType::kFloat64));
    pod<uint32_t>(static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.shape()) pod<int64_t>(d);
    out_.append(reinterpret_cast<const char*>(t.data()), static_cast<size_t>(t.size()) * sizeof(double));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const uint32_t n = pod<uint32_t>();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Tensor tensor() {
    const auto dtype = static_cast<DType>(pod<uint8_t>());
    const uint32_t rank = pod<uint32_t>();
    if (rank > 8) corrupt("implausible tensor rank");
    Shape shape(rank);
    int64_t n = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      shape[i] = pod<int64_t>();
      if (shape[i] <= 0 || shape[i] > (int64_t{1} << 32)) corrupt("bad tensor extent");
      n *= shape[i];
    }
    std::vector<double> values(static_cast<size_t>(n));
    if (dtype == DType::kFloat64) {
      need(static_cast<size_t>(n) * sizeof(double));
      std::memcpy(values.data(), in_.data() + pos_, static_cast<size_t>(n) * sizeof(double));
      pos_ += static_cast<size_t>(n) * sizeof(double);
    } else if (dtype == DType::kFloat32) {
      for (auto& v : values) v = static_cast<double>(pod<float>());
    } else {
      corrupt("unknown dtype tag");
    }
    return Tensor(std::move(shape), std::move(values));
  }
  bool done() const { return pos_ == in_.size(); }

  [[noreturn]] static void corrupt(const std::string& why) {
    throw ContractViolation("corrupt checkpoint: " + why);
  }

 private:
  void need(size_t n) const {
    if (in_.size() - pos_ < n) corrupt("truncated data");
  }

  const std::string& in_;
  size_t pos_ = 0;
};

}  // namespace

const Tensor* Checkpoint::find_tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t.value;
  return nullptr;
}

const OptimizerRecord* Checkpoint::find_optimizer(const std::string& name) const {
  for (const auto& o : optimizers)
    if (o.name == name) return &o;
  return nullptr;
}

const std::string& Checkpoint::meta_at(const std::string& key) const {
  auto it = meta.find(key);
  LMS_REQUIRE(it != meta.end(), "checkpoint has no meta key " + key);
  return it->second;
}

void Checkpoint::add_parameters(const ParameterSet& params) {
  for (const Parameter* p : params.all()) tensors.push_back({p->name, p->value});
}

void Checkpoint::load_parameters(ParameterSet& params, const std::string& prefix) const {
  load_parameters(params, prefix, prefix);
}

void Checkpoint::load_parameters(ParameterSet& params, const std::string& prefix,
                                 const std::string& source_prefix) const {
  for (Parameter* p : params.with_prefix(prefix)) {
    const std::string source = source_prefix + p->name.substr(prefix.size());
    const Tensor* t = find_tensor(source);
    LMS_REQUIRE(t != nullptr, "checkpoint lacks parameter " + source);
    LMS_REQUIRE(t->same_shape(p->value), "checkpoint shape " + shape_string(t->shape()) + " for " +
                                             p->name + " expected " + shape_string(p->value.shape()));
    p->value = *t;
  }
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.pod<uint8_t>(kCheckpointVersion);
  for (char c : kMagic) w.pod<char>(c);
  w.pod<uint32_t>(static_cast<uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    w.str(k);
    w.str(v);
  }
  w.pod<uint32_t>(static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.str(t.name);
    w.tensor(t.value);
  }
  w.pod<uint32_t>(static_cast<uint32_t>(ckpt.optimizers.size()));
  for (const auto& o : ckpt.optimizers) {
    LMS_REQUIRE(o.param_names.size() == o.state.m.size() && o.state.m.size() == o.state.v.size(),
                "optimizer record " + o.name + " is inconsistent");
    w.str(o.name);
    w.pod<int64_t>(o.state.t);
    w.pod<double>(o.state.config.learning_rate);
    w.pod<double>(o.state.config.beta1);
    w.pod<double>(o.state.config.beta2);
    w.pod<double>(o.state.config.epsilon);
    w.pod<uint32_t>(static_cast<uint32_t>(o.param_names.size()));
    for (size_t i = 0; i < o.param_names.size(); ++i) {
      w.str(o.param_names[i]);
      w.tensor(o.state.m[i]);
      w.tensor(o.state.v[i]);
    }
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  const auto version = r.pod<uint8_t>();
  if (version != kCheckpointVersion) Reader::corrupt("unsupported format version " + std::to_string(version));
  for (char c : kMagic)
    if (r.pod<char>() != c) Reader::corrupt("bad magic");
  Checkpoint ckpt;
  const uint32_t n_meta = r.pod<uint32_t>();
  for (uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    ckpt.meta[k] = r.str();
  }
  const uint32_t n_tensors = r.pod<uint32_t>();
  for (uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    ckpt.tensors.push_back({std::move(name), r.tensor()});
  }
  const uint32_t n_opt = r.pod<uint32_t>();
  for (uint32_t i = 0; i < n_opt; ++i) {
    OptimizerRecord o;
    o.name = r.str();
    o.state.t = r.pod<int64_t>();
    o.state.config.learning_rate = r.pod<double>();
    o.state.config.beta1 = r.pod<double>();
    o.state.config.beta2 = r.pod<double>();
    o.state.config.epsilon = r.pod<double>();
    const uint32_t n = r.pod<uint32_t>();
    for (uint32_t k = 0; k < n; ++k) {
      o.param_names.push_back(r.str());
      o.state.m.push_back(r.tensor());
      o.state.v.push_back(r.tensor());
    }
    ckpt.optimizers.push_back(std::move(o));
  }
  if (!r.done()) Reader::corrupt("trailing bytes");
  return ckpt;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    LMS_REQUIRE(out.good(), "cannot open " + tmp + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    LMS_REQUIRE(out.good(), "failed writing " + tmp);
  }
  LMS_REQUIRE(std::rename(tmp.c_str(), path.c_str()) == 0, "cannot move " + tmp + " to " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  LMS_REQUIRE(in.good(), "cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace lmstyle
