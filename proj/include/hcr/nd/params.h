#ifndef HCR_ND_PARAMS_H_
#define HCR_ND_PARAMS_H_

#include <cstddef>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "hcr/nd/tensor.h"

namespace hcr::nd {

// A named array owned by a model. Trainable parameters receive gradients;
// non-trainable ones (e.g. batch-norm running statistics) are buffers that
// only travel with checkpoints.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
  // Included in the L2 penalty (kernels and recurrent matrices only).
  bool decayed = false;
};

// Ordered collection of parameters. Element addresses are stable for the
// lifetime of the store; copying the store deep-copies every array.
class ParamStore {
 public:
  Param& Add(const std::string& name, Tensor value, bool trainable = true, bool decayed = false);

  Param& Get(const std::string& name);
  const Param& Get(const std::string& name) const;
  Param* Find(const std::string& name);
  const Param* Find(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void ZeroGrad();

  // Element counts.
  std::size_t NumTrainable() const;
  std::size_t NumBuffers() const;

  // Copies values (not gradients) from another store with identical layout.
  void CopyValuesFrom(const ParamStore& other);

 private:
  std::deque<Param> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace hcr::nd

#endif  // HCR_ND_PARAMS_H_
