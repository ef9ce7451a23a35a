// Copyright 2026 The nestterm Authors.
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

#pragma once

// Minimal UTF-8 handling. All offsets in the library are Unicode scalar-value
// indices, so text is decoded to code points before slicing.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nestterm::utf8 {

inline std::u32string decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    char32_t cp;
    int extra;
    if (c < 0x80) {
      cp = c;
      extra = 0;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1F;
      extra = 1;
    } else if ((c >> 4) == 0xE) {
      cp = c & 0x0F;
      extra = 2;
    } else if ((c >> 3) == 0x1E) {
      cp = c & 0x07;
      extra = 3;
    } else {
      throw std::runtime_error("invalid UTF-8 lead byte at byte " + std::to_string(i));
    }
    for (int k = 1; k <= extra; ++k) {
      if (i + k >= s.size()) throw std::runtime_error("truncated UTF-8 sequence at byte " + std::to_string(i));
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) throw std::runtime_error("invalid UTF-8 continuation at byte " + std::to_string(i + k));
      cp = (cp << 6) | (cc & 0x3F);
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) append(out, cp);
  return out;
}

inline size_t length(std::string_view s) {
  size_t n = 0;
  for (char c : s) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

// Letter test over the scripts that matter for term corpora. Not a full
// Unicode property table: Latin, Greek, Cyrillic, Armenian, Hebrew, Arabic,
// Devanagari, Georgian, Hangul, kana and CJK ideographs are covered, plus
// combining diacritics so accented forms stay inside one token.
inline bool is_letter(char32_t c) {
  if ((c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z')) return true;
  if (c < 0xAA) return false;
  if (c == 0xAA || c == 0xB5 || c == 0xBA) return true;
  if (c >= 0xC0 && c <= 0x24F) return c != 0xD7 && c != 0xF7;
  if (c >= 0x250 && c <= 0x2AF) return true;   // IPA
  if (c >= 0x300 && c <= 0x36F) return true;   // combining marks
  if (c >= 0x370 && c <= 0x3FF) return c != 0x37E && c != 0x387;
  if (c >= 0x400 && c <= 0x52F) return c < 0x482 || c > 0x489;
  if (c >= 0x531 && c <= 0x587) return true;
  if (c >= 0x5D0 && c <= 0x5EA) return true;
  if (c >= 0x620 && c <= 0x64A) return true;
  if (c >= 0x900 && c <= 0x963) return true;
  if (c >= 0x10A0 && c <= 0x10FF) return true;
  if (c >= 0x1E00 && c <= 0x1FFF) return true;  // Latin/Greek extended
  if (c >= 0x3040 && c <= 0x30FF) return true;
  if (c >= 0x4E00 && c <= 0x9FFF) return true;
  if (c >= 0xAC00 && c <= 0xD7A3) return true;
  return false;
}

inline bool is_digit(char32_t c) {
  if (c >= U'0' && c <= U'9') return true;
  if (c >= 0x660 && c <= 0x669) return true;
  if (c >= 0x966 && c <= 0x96F) return true;
  if (c >= 0xFF10 && c <= 0xFF19) return true;
  return false;
}

inline bool is_alnum(char32_t c) { return is_letter(c) || is_digit(c); }

inline bool is_hyphen(char32_t c) { return c == U'-' || c == 0x2010 || c == 0x2011; }

inline bool is_cyrillic(char32_t c) { return c >= 0x400 && c <= 0x52F; }

inline char32_t fold_case(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;   // А-Я
  if (c >= 0x400 && c <= 0x40F) return c + 80;   // Ѐ-Џ
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
  return c;
}

inline std::string fold_case(std::string_view s) {
  std::u32string cps = decode(s);
  for (auto& c : cps) c = fold_case(c);
  return encode(cps);
}

}  // namespace nestterm::utf8
