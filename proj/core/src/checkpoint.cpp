#include "neckface/checkpoint.hpp"

#include <system_error>

#include "neckface/error.hpp"

namespace neckface {

namespace fs = std::filesystem;

void save_checkpoint(const fs::path& path, const std::string& kind, const nlohmann::json& meta,
                     const std::function<void(torch::serialize::OutputArchive&)>& write_payload) {
  nlohmann::json full = meta;
  full["checkpoint_kind"] = kind;
  full["format_version"] = kCheckpointFormatVersion;

  torch::serialize::OutputArchive archive;
  archive.write("meta", c10::IValue(full.dump()));
  write_payload(archive);

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  try {
    archive.save_to(tmp.string());
  } catch (const c10::Error& e) {
    throw IoError(path, std::string("cannot write checkpoint: ") + e.what_without_backtrace());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError(path, "cannot move checkpoint into place: " + ec.message());
}

CheckpointReader open_checkpoint(const fs::path& path, const std::string& kind) {
  if (!fs::exists(path)) throw IoError(path, "checkpoint not found");
  CheckpointReader reader;
  try {
    reader.archive.load_from(path.string());
    c10::IValue meta;
    reader.archive.read("meta", meta);
    reader.meta = nlohmann::json::parse(meta.toStringRef());
  } catch (const c10::Error& e) {
    throw IoError(path, std::string("not a readable checkpoint: ") + e.what_without_backtrace());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path, std::string("corrupt checkpoint metadata: ") + e.what());
  }
  const std::string found = reader.meta.value("checkpoint_kind", "");
  if (found != kind) {
    throw DataError("checkpoint " + path.string() + " holds a '" + found + "' model, expected '" +
                    kind + "'");
  }
  return reader;
}

}  // namespace neckface
