#include "hcr/nd/params.h"

#include "hcr/common/error.h"

namespace hcr::nd {

Param& ParamStore::Add(const std::string& name, Tensor value, bool trainable, bool decayed) {
  Check(!index_.count(name), ErrorKind::kContract, "duplicate parameter '" + name + "'");
  index_[name] = params_.size();
  Param& p = params_.emplace_back();
  p.name = name;
  p.grad = Tensor(value.shape());
  p.value = std::move(value);
  p.trainable = trainable;
  p.decayed = decayed;
  return p;
}

Param& ParamStore::Get(const std::string& name) {
  Param* p = Find(name);
  Check(p != nullptr, ErrorKind::kContract, "unknown parameter '" + name + "'");
  return *p;
}

const Param& ParamStore::Get(const std::string& name) const {
  const Param* p = Find(name);
  Check(p != nullptr, ErrorKind::kContract, "unknown parameter '" + name + "'");
  return *p;
}

Param* ParamStore::Find(const std::string& name) {
  const auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

const Param* ParamStore::Find(const std::string& name) const {
  const auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

void ParamStore::ZeroGrad() {
  for (Param& p : params_) p.grad.Fill(0.0);
}

std::size_t ParamStore::NumTrainable() const {
  std::size_t n = 0;
  for (const Param& p : params_) {
    if (p.trainable) n += p.value.size();
  }
  return n;
}

std::size_t ParamStore::NumBuffers() const {
  std::size_t n = 0;
  for (const Param& p : params_) {
    if (!p.trainable) n += p.value.size();
  }
  return n;
}

void ParamStore::CopyValuesFrom(const ParamStore& other) {
  Check(other.size() == size(), ErrorKind::kContract, "parameter layout mismatch");
  auto it = other.begin();
  for (Param& p : params_) {
    Check(p.name == it->name && p.value.shape() == it->value.shape(), ErrorKind::kContract,
          "parameter layout mismatch at '" + p.name + "'");
    p.value = it->value;
    ++it;
  }
}

}  // namespace hcr::nd
