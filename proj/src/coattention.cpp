#include "misca/coattention.hpp"

#include <stdexcept>
#include <string>

namespace misca {

Value soft_slot_embed(Tape& tape, SoftSlotParams& params, Value slot_features) {
  Value tag_dist = tape.softmax_cols(
      tape.matmul(tape.leaf(params.tag_scores), slot_features));
  return tape.matmul(tape.leaf(params.tag_emb), tag_dist);
}

CoattentionStack build_chain(Tape& tape, CoattentionParams& params,
                             const std::vector<Value>& layers) {
  const int count = static_cast<int>(layers.size());
  if (count < 2) {
    throw std::invalid_argument("build_chain: need at least 2 layers, got " +
                                std::to_string(count));
  }
  if (static_cast<int>(params.proj_fwd.size()) != count ||
      static_cast<int>(params.proj_bwd.size()) != count ||
      static_cast<int>(params.bilinear.size()) != count - 1) {
    throw std::invalid_argument(
        "build_chain: parameter lists sized for " +
        std::to_string(params.proj_fwd.size()) + " layers, got " +
        std::to_string(count));
  }

  CoattentionStack stack;
  stack.layers = layers;
  for (int t = 0; t < count; ++t) {
    const int d_t = layers[static_cast<size_t>(t)].rows;
    if (params.proj_fwd[static_cast<size_t>(t)].value.cols != d_t ||
        params.proj_bwd[static_cast<size_t>(t)].value.cols != d_t) {
      throw std::invalid_argument(
          "build_chain: projection at layer " + std::to_string(t) +
          " expects width " +
          std::to_string(params.proj_fwd[static_cast<size_t>(t)].value.cols) +
          " but layer has " + std::to_string(d_t) + " rows");
    }
    stack.proj_f.push_back(tape.matmul(
        tape.leaf(params.proj_fwd[static_cast<size_t>(t)]), layers[t]));
    stack.proj_b.push_back(tape.matmul(
        tape.leaf(params.proj_bwd[static_cast<size_t>(t)]), layers[t]));
  }
  for (int t = 0; t + 1 < count; ++t) {
    Parameter& x = params.bilinear[static_cast<size_t>(t)];
    if (x.value.rows != layers[static_cast<size_t>(t)].rows ||
        x.value.cols != layers[static_cast<size_t>(t + 1)].rows) {
      throw std::invalid_argument(
          "build_chain: bilinear map between layers " + std::to_string(t) +
          " and " + std::to_string(t + 1) + " has shape " +
          x.value.shape_str() + ", expected " +
          std::to_string(layers[static_cast<size_t>(t)].rows) + "x" +
          std::to_string(layers[static_cast<size_t>(t + 1)].rows));
    }
    stack.corr.push_back(
        tape.matmul(tape.transpose(layers[static_cast<size_t>(t)]),
                    tape.matmul(tape.leaf(x), layers[t + 1])));
  }
  return stack;
}

CoattentionOut run_coattention(Tape& tape, const CoattentionStack& stack) {
  const int count = stack.size();
  CoattentionOut out;
  out.h_bwd.assign(static_cast<size_t>(count), Value{});
  out.h_fwd.assign(static_cast<size_t>(count), Value{});

  // Backward chain: layer L-2 seeds from the projected last layer, then
  // each step folds the next layer's state through the shared correlation.
  for (int t = count - 2; t >= 0; --t) {
    Value upstream = (t == count - 2) ? stack.proj_b[static_cast<size_t>(t + 1)]
                                      : out.h_bwd[static_cast<size_t>(t + 1)];
    out.h_bwd[static_cast<size_t>(t)] = tape.tanh(tape.add(
        tape.matmul(upstream,
                    tape.transpose(stack.corr[static_cast<size_t>(t)])),
        stack.proj_b[static_cast<size_t>(t)]));
  }

  // Forward chain, mirrored.
  for (int t = 1; t < count; ++t) {
    Value upstream = (t == 1) ? stack.proj_f[0]
                              : out.h_fwd[static_cast<size_t>(t - 1)];
    out.h_fwd[static_cast<size_t>(t)] = tape.tanh(tape.add(
        tape.matmul(upstream, stack.corr[static_cast<size_t>(t - 1)]),
        stack.proj_f[static_cast<size_t>(t)]));
  }
  return out;
}

}  // namespace misca
