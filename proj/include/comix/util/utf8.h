// Copyright (c) 2026 The Comix Authors
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

#ifndef COMIX_UTIL_UTF8_H_
#define COMIX_UTIL_UTF8_H_

#include <string>
#include <string_view>

namespace comix::utf8 {

// Invalid sequences decode to U+FFFD.
std::u32string Decode(std::string_view text);
std::string Encode(std::u32string_view cps);
std::string Encode(char32_t cp);

inline bool IsDevanagari(char32_t c) { return c >= 0x0900 && c <= 0x097F; }
inline bool IsAsciiLetter(char32_t c) {
  return (c >= U'A' && c <= U'Z') || (c >= U'a' && c <= U'z');
}
inline bool IsAsciiDigit(char32_t c) { return c >= U'0' && c <= U'9'; }
bool IsSpace(char32_t c);

}  // namespace comix::utf8

#endif  // COMIX_UTIL_UTF8_H_
