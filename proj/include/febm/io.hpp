#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "febm/energy.hpp"
#include "febm/ensemble.hpp"
#include "febm/flow.hpp"
#include "febm/optim.hpp"
#include "febm/tensor.hpp"

namespace febm {

// Binary checkpoint: magic "FEBM", little-endian u32 version, u32 record
// count, then per record a u16 name length, the UTF-8 name, u8 dtype
// (0 = f64), u8 rank, rank little-endian u32 extents, and the row-major
// little-endian payload.  Model hyperparameters travel as ordinary f64
// records named "meta.*" so a checkpoint is self-describing.
struct Checkpoint {
  std::uint32_t version = 1;
  std::vector<std::pair<std::string, Tensor>> records;

  void add(std::string name, Tensor value);
  // nullptr when absent.
  const Tensor* find(const std::string& name) const;
  // Throws IoError when absent.
  const Tensor& require(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Deep-copies every parameter into records under its canonical name.
Checkpoint make_checkpoint(const std::vector<NamedParam>& params);

// Copies record values back into the parameters.  Every parameter must be
// present with a matching shape; verification happens before any copy so a
// failed load leaves the model untouched.  Extra records are ignored.
void apply_params(const Checkpoint& ckpt,
                  const std::vector<NamedParam>& params);

// Model-level wrappers.  Flow checkpoints hold a "meta.flow" record with
// [dim, depth, hidden_width]; tilted checkpoints additionally hold
// "meta.energy" with [dim, hidden_layers, hidden_width].
Checkpoint checkpoint_flow(FlowModel& flow);
Checkpoint checkpoint_tilted(FlowModel& flow, EnergyModel& energy);
FlowModel restore_flow(const Checkpoint& ckpt);
void restore_tilted(const Checkpoint& ckpt, FlowModel& flow,
                    EnergyModel& energy);
bool has_energy(const Checkpoint& ckpt);

// Chain history CSV.  One leading comment line
//   # febm-chains v1 burn_in=<recorded units> stride=<raw steps> dim=<d>
// carries the fields the column data cannot, then the fixed header
//   chain,step,accepted,step_size,energy,z0,...,z{d-1}
// with one row per (chain, recorded step) in chain-major order.  The step
// column holds the raw step index (t + 1) * stride.  Values print with 17
// significant digits so a round-trip is bit-exact.
void dump_chains(const std::string& path, const ChainEnsemble& e);
ChainEnsemble load_chains(const std::string& path);

// Plain CSV with a header row; data is [rows, header.size()].
void write_csv(const std::string& path,
               const std::vector<std::string>& header, const Tensor& data);

// IDX image/label files (big-endian u32 magic and extents, u8 payload).
// Images use magic 0x00000803 with extents [count, rows, cols] and are
// returned flattened to [count, rows * cols] with pixels mapped from
// [0, 255] to [-1, 1].  Labels use magic 0x00000801.
Tensor load_idx_images(const std::string& path, std::size_t* rows_out = nullptr,
                       std::size_t* cols_out = nullptr);
std::vector<std::uint8_t> load_idx_labels(const std::string& path);

// Averages factor x factor pixel blocks; rows and cols must divide evenly.
Tensor block_downscale(const Tensor& images, std::size_t rows,
                       std::size_t cols, std::size_t factor);

}  // namespace febm
