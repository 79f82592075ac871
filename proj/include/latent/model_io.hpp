#pragma once

#include <filesystem>
#include <iosfwd>

#include "latent/dense_head.hpp"

namespace latent {

// Text model format (see docs/formats.md):
//
//   latent-atlas-model 1
//   input_dim <n>
//   hidden_dims <count> <h1> ... <hL>
//   seed <u64>
//   learning_rate <real>
//   epochs <n>
//   batch_size <n>
//   layer <index> <outputs> <inputs>
//   <outputs lines of <inputs> weights, row-major>
//   <one line of <outputs> biases>
//   ... one block per layer, output layer last ...
//   end
//
// Reals are written with 17 significant digits so loading restores the
// exact bit pattern.
void write_model(std::ostream& out, const DenseHead& model);
DenseHead read_model(std::istream& in);

void save_model(const std::filesystem::path& path, const DenseHead& model);
DenseHead load_model(const std::filesystem::path& path);

}  // namespace latent
