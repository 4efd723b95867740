#include "metasel/policy/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace metasel::policy {
namespace {

using nlohmann::json;

void put_f64(std::ostream& out, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  std::array<char, 8> bytes;
  for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(bytes.data(), 8);
}

double get_f64(std::istream& in) {
  std::array<unsigned char, 8> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), 8);
  if (!in) throw IoFailure("checkpoint truncated");
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[static_cast<std::size_t>(i)];
  return std::bit_cast<double>(bits);
}

void write_tensors(std::ostream& out, const PolicyParams<double>& p) {
  for_each_tensor(p, [&](const std::string&, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
    }
  });
}

void read_tensors(std::istream& in, PolicyParams<double>& p) {
  for_each_tensor(p, [&](const std::string&, Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get_f64(in);
    }
  });
}

}  // namespace

const PolicyParams<double>* Checkpoint::section(const std::string& name) const {
  for (const auto& [n, p] : sections) {
    if (n == name) return &p;
  }
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto& s = ckpt.params.shape;
  json header;
  header["version"] = 1;
  header["vocab_size"] = s.vocab_size;
  header["d_model"] = s.d_model;
  header["heads"] = s.heads;
  header["metarule_dim"] = s.metarule_dim;
  header["pool_size"] = kPoolSize;
  header["p_min"] = s.p_min;
  json tensors = json::array();
  for_each_tensor(ckpt.params, [&](const std::string& name, const Eigen::MatrixXd& m) {
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  header["tensors"] = std::move(tensors);
  json sections = json::array({"params"});
  for (const auto& [name, p] : ckpt.sections) {
    if (!(p.shape == s)) throw ShapeMismatch("checkpoint section " + name + " has a different shape");
    sections.push_back(name);
  }
  header["sections"] = std::move(sections);
  header["meta"] = ckpt.meta;

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot write " + tmp.string());
    out << kCheckpointMagic << '\n' << header.dump() << '\n';
    write_tensors(out, ckpt.params);
    for (const auto& [name, p] : ckpt.sections) write_tensors(out, p);
    if (!out) throw IoFailure("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoFailure("cannot move checkpoint into place: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot read checkpoint " + path.string());
  std::string magic, line;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) throw IoFailure("not a policy checkpoint: " + path.string());
  std::getline(in, line);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw IoFailure("bad checkpoint header in " + path.string() + ": " + e.what());
  }

  Checkpoint ckpt;
  try {
    PolicyShape s;
    s.vocab_size = header.at("vocab_size").get<std::int32_t>();
    s.d_model = header.at("d_model").get<int>();
    s.heads = header.at("heads").get<int>();
    s.metarule_dim = header.at("metarule_dim").get<int>();
    s.p_min = header.at("p_min").get<double>();
    if (header.at("pool_size").get<std::size_t>() != kPoolSize) throw ShapeMismatch("checkpoint pool size differs");
    ckpt.params = zero_params<double>(s);
    std::size_t i = 0;
    const auto& tensors = header.at("tensors");
    for_each_tensor(ckpt.params, [&](const std::string& name, const Eigen::MatrixXd& m) {
      if (i >= tensors.size() || tensors[i].at("name") != name || tensors[i].at("rows") != m.rows() ||
          tensors[i].at("cols") != m.cols()) {
        throw ShapeMismatch("checkpoint tensor table does not match tensor " + name);
      }
      ++i;
    });
    if (i != tensors.size()) throw ShapeMismatch("checkpoint lists extra tensors");
    read_tensors(in, ckpt.params);
    const auto& sections = header.at("sections");
    for (std::size_t k = 1; k < sections.size(); ++k) {
      auto p = zero_params<double>(s);
      read_tensors(in, p);
      ckpt.sections.emplace_back(sections[k].get<std::string>(), std::move(p));
    }
    ckpt.meta = header.at("meta").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw IoFailure("bad checkpoint header in " + path.string() + ": " + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoFailure("trailing bytes in checkpoint " + path.string());
  return ckpt;
}

}  // namespace metasel::policy
