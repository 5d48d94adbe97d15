#include "mmt/checkpoint.hpp"

#include <openssl/evp.h>

#include <memory>

#include <fstream>
#include <iterator>

#include "mmt/binary_io.hpp"
#include "mmt/config.hpp"
#include "mmt/error.hpp"

namespace mmt {

namespace {

constexpr char kMagic[8] = {'M', 'M', 'T', 'C', 'K', 'P', 'T', '\0'};

void write_params(BinaryWriter& w, const ParameterSet& ps) {
  w.u32(static_cast<std::uint32_t>(ps.size()));
  for (const auto& p : ps) {
    w.str(p.name);
    w.u8(p.decay ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) w.u64(d);
    w.f64s(p.value.values());
  }
}

ParameterSet read_params(BinaryReader& r) {
  ParameterSet ps;
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    const bool decay = r.u8() != 0;
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) throw CheckpointError("tensor " + name + " has rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    Tensor t(shape);
    r.f64s(t.values());
    ps.add(std::move(name), std::move(t), decay);
  }
  return ps;
}

}  // namespace

const char* stage_name(CheckpointStage s) { return s == CheckpointStage::Pretrain ? "pretrain" : "finetune"; }

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ck) {
  if (ck.stage == CheckpointStage::Finetune && ck.decoder.size() != 0)
    throw CheckpointError("fine-tuning checkpoints carry no decoder parameters");
  json header;
  header["stage"] = stage_name(ck.stage);
  header["tokenizer"] = ck.tokenizer;
  header["model"] = ck.model;
  if (ck.mae) header["mae"] = *ck.mae;
  header["meta"] = ck.meta;
  const std::string text = header.dump();

  BinaryWriter w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(ck.stage));
  w.str(text);
  write_params(w, ck.encoder);
  write_params(w, ck.decoder);
  return w.buffer();
}

Checkpoint deserialize_checkpoint(std::vector<unsigned char> bytes, const std::string& origin) {
  const std::string where = origin.empty() ? "" : " in " + origin;
  try {
    BinaryReader r(std::move(bytes));
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (!std::equal(magic, magic + 8, kMagic)) throw CheckpointError("not a checkpoint" + where);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
      throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                            std::to_string(kCheckpointVersion) + ")" + where);
    Checkpoint ck;
    const std::uint8_t stage = r.u8();
    if (stage > 1) throw CheckpointError("unknown checkpoint stage " + std::to_string(stage) + where);
    ck.stage = static_cast<CheckpointStage>(stage);
    const json header = json::parse(r.str());
    ck.tokenizer = header.at("tokenizer").get<TokenizerConfig>();
    ck.model = header.at("model").get<ModelConfig>();
    if (header.contains("mae")) ck.mae = header.at("mae").get<MaeConfig>();
    if (header.contains("meta")) ck.meta = header.at("meta");
    ck.encoder = read_params(r);
    ck.decoder = read_params(r);
    r.expect_end();
    if (ck.stage == CheckpointStage::Finetune && ck.decoder.size() != 0)
      throw CheckpointError("fine-tuning checkpoint with decoder parameters" + where);
    return ck;
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(std::string("malformed checkpoint") + where + ": " + e.what());
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header") + where + ": " + e.what());
  }
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  BinaryWriter w;
  const auto bytes = serialize_checkpoint(ck);
  w.bytes(bytes.data(), bytes.size());
  w.save(path);
}

std::string save_finetune_checkpoint(const MbtModel& model, const std::filesystem::path& path, const json& meta) {
  Checkpoint ck;
  ck.stage = CheckpointStage::Finetune;
  ck.tokenizer = model.tokenizer();
  ck.model = model.config();
  ck.encoder = model.params();
  ck.meta = meta;
  save_checkpoint(ck, path);
  return file_content_hash(path);
}

std::string save_pretrain_checkpoint(const MbtModel& encoder, const ParameterSet& decoder, const MaeConfig& mae,
                                     const std::filesystem::path& path, const json& meta) {
  Checkpoint ck;
  ck.stage = CheckpointStage::Pretrain;
  ck.tokenizer = encoder.tokenizer();
  ck.model = encoder.config();
  ck.mae = mae;
  ck.encoder = encoder.params();
  ck.decoder = decoder;
  ck.meta = meta;
  save_checkpoint(ck, path);
  return file_content_hash(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw FileError("checkpoint not found: " + path.string());
  BinaryReader r(path);
  return deserialize_checkpoint(r.buffer(), path.string());
}

std::string git_blob_hash(std::span<const unsigned char> bytes) {
  const std::string prefix = "blob " + std::to_string(bytes.size()) + '\0';
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), prefix.data(), prefix.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw Error("hash", "SHA-1 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    const unsigned char c = digest[i];
    out += hex[c >> 4];
    out += hex[c & 15];
  }
  return out;
}

std::string file_content_hash(const std::filesystem::path& path) {
  BinaryReader r(path);
  return git_blob_hash(r.buffer());
}

}  // namespace mmt
