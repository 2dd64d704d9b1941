#include "febm/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "febm/errors.hpp"

namespace febm {

namespace {

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i)
    buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

// Bounds-checked little-endian reader over a byte string.
struct Cursor {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw IoError("checkpoint: truncated file");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint16_t u16() {
    std::uint16_t v = u8();
    v |= static_cast<std::uint16_t>(u8()) << 8;
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return std::bit_cast<double>(v);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  if (!in.good() && !in.eof()) throw IoError("cannot read " + path);
  return os.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out.good()) throw IoError("cannot write " + path);
}

// %.17g prints enough digits that strtod recovers the exact double.
void append_f64_text(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

std::size_t meta_index(const Tensor& meta, std::size_t i, const char* what) {
  const double v = meta[i];
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e9)
    throw IoError(std::string("checkpoint: invalid ") + what);
  return static_cast<std::size_t>(v);
}

}  // namespace

void Checkpoint::add(std::string name, Tensor value) {
  records.emplace_back(std::move(name), std::move(value));
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : records)
    if (n == name) return &t;
  return nullptr;
}

const Tensor& Checkpoint::require(const std::string& name) const {
  const Tensor* t = find(name);
  if (!t) throw IoError("checkpoint: missing record " + name);
  return *t;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string buf;
  buf += "FEBM";
  put_u32(buf, ckpt.version);
  put_u32(buf, static_cast<std::uint32_t>(ckpt.records.size()));
  for (const auto& [name, t] : ckpt.records) {
    if (name.empty() || name.size() > 0xffff)
      throw IoError("checkpoint: record name length out of range");
    if (t.rank() == 0 || t.rank() > 0xff)
      throw IoError("checkpoint: record " + name + " has unsupported rank");
    put_u16(buf, static_cast<std::uint16_t>(name.size()));
    buf += name;
    buf.push_back(0);  // dtype 0 = f64
    buf.push_back(static_cast<char>(t.rank()));
    for (std::size_t a = 0; a < t.rank(); ++a) {
      if (t.extent(a) > 0xffffffffull)
        throw IoError("checkpoint: record " + name + " extent overflows u32");
      put_u32(buf, static_cast<std::uint32_t>(t.extent(a)));
    }
    for (std::size_t i = 0; i < t.size(); ++i) put_f64(buf, t[i]);
  }
  write_file(path, buf);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string buf = read_file(path);
  Cursor cur{buf};
  if (cur.bytes(4) != "FEBM") throw IoError(path + ": bad checkpoint magic");
  Checkpoint ckpt;
  ckpt.version = cur.u32();
  if (ckpt.version != 1)
    throw IoError(path + ": unsupported checkpoint version " +
                  std::to_string(ckpt.version));
  const std::uint32_t count = cur.u32();
  std::set<std::string> seen;
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint16_t name_len = cur.u16();
    const std::string name = cur.bytes(name_len);
    if (name.empty() || !seen.insert(name).second)
      throw IoError(path + ": empty or duplicate record name");
    const std::uint8_t dtype = cur.u8();
    if (dtype != 0)
      throw IoError(path + ": record " + name + " has unknown dtype " +
                    std::to_string(dtype));
    const std::uint8_t rank = cur.u8();
    if (rank == 0) throw IoError(path + ": record " + name + " has rank 0");
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    // Payload is 8 bytes per element; a bogus extent cannot force a huge
    // allocation before the cursor notices truncation.
    const std::size_t max_total = (buf.size() - cur.pos) / 8 + 1;
    for (auto& e : shape) {
      e = cur.u32();
      if (e == 0) throw IoError(path + ": record " + name + " has zero extent");
      if (total > max_total / e) throw IoError(path + ": truncated file");
      total *= e;
    }
    std::vector<double> data(total);
    for (auto& v : data) v = cur.f64();
    ckpt.records.emplace_back(name, Tensor(std::move(shape), std::move(data)));
  }
  if (cur.pos != buf.size())
    throw IoError(path + ": trailing bytes after last record");
  return ckpt;
}

Checkpoint make_checkpoint(const std::vector<NamedParam>& params) {
  Checkpoint ckpt;
  for (const auto& p : params) ckpt.add(p.name, *p.value);
  return ckpt;
}

void apply_params(const Checkpoint& ckpt,
                  const std::vector<NamedParam>& params) {
  for (const auto& p : params) {
    const Tensor& src = ckpt.require(p.name);
    if (!src.same_shape(*p.value))
      throw IoError("checkpoint: record " + p.name + " has shape " +
                    src.shape_string() + ", model expects " +
                    p.value->shape_string());
  }
  for (const auto& p : params) *p.value = ckpt.require(p.name);
}

Checkpoint checkpoint_flow(FlowModel& flow) {
  Checkpoint ckpt;
  const FlowConfig& c = flow.config();
  ckpt.add("meta.flow",
           Tensor({3}, {static_cast<double>(c.dim),
                        static_cast<double>(c.depth),
                        static_cast<double>(c.hidden_width)}));
  for (const auto& p : flow.params()) ckpt.add(p.name, *p.value);
  return ckpt;
}

Checkpoint checkpoint_tilted(FlowModel& flow, EnergyModel& energy) {
  Checkpoint ckpt = checkpoint_flow(flow);
  const EnergyConfig& c = energy.config();
  ckpt.add("meta.energy",
           Tensor({3}, {static_cast<double>(c.dim),
                        static_cast<double>(c.hidden_layers),
                        static_cast<double>(c.hidden_width)}));
  for (const auto& p : energy.params()) ckpt.add(p.name, *p.value);
  return ckpt;
}

FlowModel restore_flow(const Checkpoint& ckpt) {
  const Tensor& meta = ckpt.require("meta.flow");
  if (meta.size() != 3) throw IoError("checkpoint: malformed meta.flow");
  FlowConfig cfg;
  cfg.dim = meta_index(meta, 0, "flow dim");
  cfg.depth = meta_index(meta, 1, "flow depth");
  cfg.hidden_width = meta_index(meta, 2, "flow hidden width");
  FlowModel flow(cfg);
  apply_params(ckpt, flow.params());
  // Saved parameters already include the data-dependent affine init.
  flow.mark_actnorm_ready();
  return flow;
}

void restore_tilted(const Checkpoint& ckpt, FlowModel& flow,
                    EnergyModel& energy) {
  flow = restore_flow(ckpt);
  const Tensor& meta = ckpt.require("meta.energy");
  if (meta.size() != 3) throw IoError("checkpoint: malformed meta.energy");
  EnergyConfig cfg;
  cfg.dim = meta_index(meta, 0, "energy dim");
  if (!(meta[1] >= 0.0) || meta[1] != std::floor(meta[1]) || meta[1] > 1e9)
    throw IoError("checkpoint: invalid energy hidden layer count");
  cfg.hidden_layers = static_cast<std::size_t>(meta[1]);
  cfg.hidden_width = meta_index(meta, 2, "energy hidden width");
  energy = EnergyModel(cfg);
  apply_params(ckpt, energy.params());
}

bool has_energy(const Checkpoint& ckpt) {
  return ckpt.find("meta.energy") != nullptr;
}

void dump_chains(const std::string& path, const ChainEnsemble& e) {
  e.validate();
  std::string out;
  out.reserve(e.chains * e.steps * (e.dim + 5) * 12);
  out += "# febm-chains v1 burn_in=" + std::to_string(e.burn_in) +
         " stride=" + std::to_string(e.stride) +
         " dim=" + std::to_string(e.dim) + "\n";
  out += "chain,step,accepted,step_size,energy";
  for (std::size_t j = 0; j < e.dim; ++j) out += ",z" + std::to_string(j);
  out += "\n";
  for (std::size_t c = 0; c < e.chains; ++c) {
    for (std::size_t t = 0; t < e.steps; ++t) {
      const std::size_t s = e.scalar_index(c, t);
      out += std::to_string(c);
      out += ',';
      out += std::to_string((t + 1) * e.stride);
      out += ',';
      out += e.accepted[s] ? '1' : '0';
      out += ',';
      append_f64_text(out, e.step_size[s]);
      out += ',';
      append_f64_text(out, e.energy[s]);
      for (std::size_t j = 0; j < e.dim; ++j) {
        out += ',';
        append_f64_text(out, e.at(c, t, j));
      }
      out += '\n';
    }
  }
  write_file(path, out);
}

namespace {

// Parses one strictly comma-separated CSV row of numeric fields.
std::vector<double> parse_row(const std::string& line, std::size_t want,
                              const std::string& path) {
  std::vector<double> vals;
  vals.reserve(want);
  const char* p = line.c_str();
  while (true) {
    char* end = nullptr;
    const double v = std::strtod(p, &end);
    if (end == p) throw IoError(path + ": malformed numeric field");
    vals.push_back(v);
    p = end;
    if (*p == '\0') break;
    if (*p != ',') throw IoError(path + ": expected comma in data row");
    ++p;
  }
  if (vals.size() != want)
    throw IoError(path + ": expected " + std::to_string(want) +
                  " fields per row, found " + std::to_string(vals.size()));
  return vals;
}

}  // namespace

ChainEnsemble load_chains(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  std::size_t burn_in = 0, stride = 0, dim = 0;
  if (std::sscanf(line.c_str(), "# febm-chains v1 burn_in=%zu stride=%zu dim=%zu",
                  &burn_in, &stride, &dim) != 3)
    throw IoError(path + ": missing chain header comment");
  if (dim == 0 || stride == 0) throw IoError(path + ": invalid chain header");
  std::string header = "chain,step,accepted,step_size,energy";
  for (std::size_t j = 0; j < dim; ++j) header += ",z" + std::to_string(j);
  if (!std::getline(in, line) || line != header)
    throw IoError(path + ": unexpected column header");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_row(line, 5 + dim, path));
  }
  if (rows.empty()) throw IoError(path + ": no chain data");
  const std::size_t chains = static_cast<std::size_t>(rows.back()[0]) + 1;
  if (rows.size() % chains != 0)
    throw IoError(path + ": ragged chain lengths");
  const std::size_t steps = rows.size() / chains;

  ChainEnsemble e = ChainEnsemble::empty(chains, steps, dim);
  e.burn_in = burn_in;
  e.stride = stride;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t c = r / steps;
    const std::size_t t = r % steps;
    const auto& row = rows[r];
    if (row[0] != static_cast<double>(c) ||
        row[1] != static_cast<double>((t + 1) * stride))
      throw IoError(path + ": rows out of canonical chain-major order");
    if (row[2] != 0.0 && row[2] != 1.0)
      throw IoError(path + ": accepted flag must be 0 or 1");
    const std::size_t s = e.scalar_index(c, t);
    e.accepted[s] = row[2] != 0.0;
    e.step_size[s] = row[3];
    e.energy[s] = row[4];
    for (std::size_t j = 0; j < dim; ++j) e.at(c, t, j) = row[5 + j];
  }
  e.validate();
  return e;
}

void write_csv(const std::string& path,
               const std::vector<std::string>& header, const Tensor& data) {
  if (header.empty() || data.rank() != 2 || data.cols() != header.size())
    throw ShapeError("write_csv: header and data disagree");
  std::string out;
  out.reserve(data.size() * 12);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out += ',';
    out += header[j];
  }
  out += '\n';
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
      if (j) out += ',';
      append_f64_text(out, data.at(i, j));
    }
    out += '\n';
  }
  write_file(path, out);
}

namespace {

// IDX scalars are big-endian.
std::uint32_t be_u32(Cursor& cur) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | cur.u8();
  return v;
}

}  // namespace

Tensor load_idx_images(const std::string& path, std::size_t* rows_out,
                       std::size_t* cols_out) {
  const std::string buf = read_file(path);
  Cursor cur{buf};
  const std::uint32_t magic = be_u32(cur);
  if (magic != 0x00000803u)
    throw IoError(path + ": not an IDX u8 image file (magic " +
                  std::to_string(magic) + ")");
  const std::size_t count = be_u32(cur);
  const std::size_t rows = be_u32(cur);
  const std::size_t cols = be_u32(cur);
  if (count == 0 || rows == 0 || cols == 0)
    throw IoError(path + ": empty IDX image file");
  const std::size_t pixels = rows * cols;
  cur.need(count * pixels);
  Tensor images = Tensor::zeros({count, pixels});
  for (std::size_t i = 0; i < count * pixels; ++i) {
    const double v = static_cast<std::uint8_t>(buf[cur.pos + i]);
    images[i] = v / 255.0 * 2.0 - 1.0;
  }
  cur.pos += count * pixels;
  if (cur.pos != buf.size()) throw IoError(path + ": trailing bytes");
  if (rows_out) *rows_out = rows;
  if (cols_out) *cols_out = cols;
  return images;
}

std::vector<std::uint8_t> load_idx_labels(const std::string& path) {
  const std::string buf = read_file(path);
  Cursor cur{buf};
  const std::uint32_t magic = be_u32(cur);
  if (magic != 0x00000801u)
    throw IoError(path + ": not an IDX u8 label file (magic " +
                  std::to_string(magic) + ")");
  const std::size_t count = be_u32(cur);
  cur.need(count);
  std::vector<std::uint8_t> labels(count);
  for (std::size_t i = 0; i < count; ++i)
    labels[i] = static_cast<std::uint8_t>(buf[cur.pos + i]);
  cur.pos += count;
  if (cur.pos != buf.size()) throw IoError(path + ": trailing bytes");
  return labels;
}

Tensor block_downscale(const Tensor& images, std::size_t rows,
                       std::size_t cols, std::size_t factor) {
  if (factor == 0) throw DomainError("block_downscale: zero factor");
  if (images.rank() != 2 || images.cols() != rows * cols)
    throw ShapeError("block_downscale: images do not match rows * cols");
  if (rows % factor != 0 || cols % factor != 0)
    throw ShapeError("block_downscale: factor must divide both extents");
  const std::size_t out_r = rows / factor;
  const std::size_t out_c = cols / factor;
  Tensor out = Tensor::zeros({images.rows(), out_r * out_c});
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t n = 0; n < images.rows(); ++n) {
    const double* src = images.row_ptr(n);
    double* dst = out.row_ptr(n);
    for (std::size_t r = 0; r < out_r; ++r) {
      for (std::size_t c = 0; c < out_c; ++c) {
        double acc = 0.0;
        for (std::size_t dr = 0; dr < factor; ++dr)
          for (std::size_t dc = 0; dc < factor; ++dc)
            acc += src[(r * factor + dr) * cols + (c * factor + dc)];
        dst[r * out_c + c] = acc * inv;
      }
    }
  }
  return out;
}

}  // namespace febm
