// Copyright 2026 The Prosodia Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prosodia/binary_io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <iterator>
#include <limits>

#include "prosodia/error.hpp"

namespace prosodia::binary {

void Writer::put_string16(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw ValidationError(fmt::format("string of {} bytes exceeds u16 length prefix", s.size()));
  }
  put(static_cast<std::uint16_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void Reader::require(std::size_t n) const {
  if (remaining() < n) {
    throw FormatError(fmt::format("{}: truncated payload: expected {} more bytes at offset {}, found {}",
                                  source_, n, pos_, remaining()));
  }
}

std::string Reader::get_bytes(std::size_t n) {
  require(n);
  std::string out(bytes_.data() + pos_, n);
  pos_ += n;
  return out;
}

std::string Reader::get_string16() {
  const auto n = get<std::uint16_t>();
  return get_bytes(n);
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(fmt::format("read failure on '{}'", path.string()));
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
  if (path.empty()) throw IoError("write failed: empty path");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("write failure on '{}'", path.string()));
}

}  // namespace prosodia::binary
