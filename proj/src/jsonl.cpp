// SPDX-License-Identifier: Apache-2.0
#include "claimcheck/jsonl.hpp"

#include <sstream>
#include <stdexcept>

#include "claimcheck/text.hpp"

namespace claimcheck {

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, Json)>& on_record,
                    const std::function<void(std::size_t, std::string_view)>& on_error) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::parse_error& e) {
      on_error(line_no, e.what());
      continue;
    }
    on_record(line_no, std::move(record));
  }
  if (in.bad()) throw std::runtime_error("read error on " + path.string());
}

AtomicFileWriter::AtomicFileWriter(std::filesystem::path path)
    : path_(std::move(path)), tmp_(path_.string() + ".tmp") {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write " + tmp_.string());
}

AtomicFileWriter::~AtomicFileWriter() {
  if (!committed_) {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(tmp_, ec);
  }
}

void AtomicFileWriter::write_line(std::string_view line) {
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.put('\n');
}

void AtomicFileWriter::commit() {
  out_.flush();
  if (!out_) throw std::runtime_error("write failed for " + tmp_.string());
  out_.close();
  std::filesystem::rename(tmp_, path_);
  committed_ = true;
}

std::string json_quote(std::string_view s) {
  return Json(std::string(s)).dump(-1, ' ', false, Json::error_handler_t::replace);
}

std::string dump_compact(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

std::string dump_compact(const OrderedJson& j) {
  return j.dump(-1, ' ', false, OrderedJson::error_handler_t::replace);
}

void write_text_atomic(const std::filesystem::path& path, std::string_view content) {
  AtomicFileWriter w(path);
  w.stream().write(content.data(), static_cast<std::streamsize>(content.size()));
  w.commit();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace claimcheck
