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

#include "comix/textnorm.h"

#include <algorithm>
#include <array>
#include <fstream>

#include "comix/error.h"
#include "comix/util/subprocess.h"
#include "comix/util/utf8.h"

namespace comix::textnorm {

namespace {

constexpr char32_t kVirama = 0x094D;

bool IsRetainedPunct(char32_t c) {
  return c == U'.' || c == U',' || c == U'?' || c == U'!' || c == 0x0964;
}

bool HasLatin(std::u32string_view s) {
  return std::any_of(s.begin(), s.end(), utf8::IsAsciiLetter);
}

struct VowelRule {
  const char* latin;
  const char* independent;
  const char* matra;
};

struct ConsonantRule {
  const char* latin;
  const char* devanagari;
};

// Longest match first within each table; the scanner tries length 3, then 2,
// then 1 across both tables.
const std::array<VowelRule, 14> kVowels = {{
    {"aa", "आ", "ा"},
    {"ai", "ऐ", "ै"},
    {"au", "औ", "ौ"},
    {"ee", "ई", "ी"},
    {"ea", "ई", "ी"},
    {"ei", "ए", "े"},
    {"ie", "ई", "ी"},
    {"oo", "ऊ", "ू"},
    {"ou", "औ", "ौ"},
    {"a", "अ", ""},
    {"e", "ए", "े"},
    {"i", "इ", "ि"},
    {"o", "ओ", "ो"},
    {"u", "उ", "ु"},
}};

const std::array<ConsonantRule, 35> kConsonants = {{
    {"ksh", "क्ष"}, {"chh", "छ"},  {"ch", "च"}, {"sh", "श"}, {"th", "थ"},
    {"dh", "ध"},   {"bh", "भ"},   {"ph", "फ"}, {"kh", "ख"}, {"gh", "घ"},
    {"jh", "झ"},   {"ck", "क"},   {"qu", "क्व"}, {"b", "ब"}, {"c", "क"},
    {"d", "ड"},    {"f", "फ"},    {"g", "ग"},  {"h", "ह"},  {"j", "ज"},
    {"k", "क"},    {"l", "ल"},    {"m", "म"},  {"n", "न"},  {"p", "प"},
    {"q", "क"},    {"r", "र"},    {"s", "स"},  {"t", "ट"},  {"v", "व"},
    {"w", "व"},    {"x", "क्स"},   {"y", "य"},  {"z", "ज़"}, {"", ""},
}};

const std::array<const char*, 100> kUnits = {
    "शून्य",   "एक",     "दो",     "तीन",    "चार",    "पाँच",    "छह",     "सात",    "आठ",     "नौ",
    "दस",     "ग्यारह",  "बारह",   "तेरह",    "चौदह",   "पंद्रह",   "सोलह",   "सत्रह",   "अठारह",  "उन्नीस",
    "बीस",    "इक्कीस",  "बाईस",   "तेईस",    "चौबीस",  "पच्चीस",  "छब्बीस", "सत्ताईस", "अट्ठाईस", "उनतीस",
    "तीस",    "इकतीस",  "बत्तीस",  "तैंतीस",   "चौंतीस",  "पैंतीस",   "छत्तीस",  "सैंतीस",  "अड़तीस",  "उनतालीस",
    "चालीस",  "इकतालीस", "बयालीस", "तैंतालीस", "चवालीस", "पैंतालीस", "छियालीस", "सैंतालीस", "अड़तालीस", "उनचास",
    "पचास",   "इक्यावन", "बावन",   "तिरेपन",   "चौवन",   "पचपन",   "छप्पन",   "सत्तावन", "अट्ठावन", "उनसठ",
    "साठ",    "इकसठ",   "बासठ",   "तिरेसठ",   "चौंसठ",   "पैंसठ",    "छियासठ", "सड़सठ",   "अड़सठ",   "उनहत्तर",
    "सत्तर",   "इकहत्तर", "बहत्तर",  "तिहत्तर",   "चौहत्तर", "पचहत्तर", "छिहत्तर", "सतहत्तर", "अठहत्तर", "उन्यासी",
    "अस्सी",   "इक्यासी", "बयासी",  "तिरासी",   "चौरासी", "पचासी",   "छियासी", "सत्तासी", "अट्ठासी", "नवासी",
    "नब्बे",   "इक्यानवे", "बानवे",  "तिरानवे",  "चौरानवे", "पचानवे",  "छियानवे", "सत्तानवे", "अट्ठानवे", "निन्यानवे",
};

std::string ToLowerAscii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool IsAllUpperLatin(std::u32string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](char32_t c) { return c >= U'A' && c <= U'Z'; });
}

// Splits a token surface into runs of letters (Latin or Devanagari), digits
// and everything else.
enum class RunKind { kLetters, kDigits, kOther };

struct Run {
  RunKind kind;
  std::u32string text;
};

RunKind KindOf(char32_t c) {
  if (utf8::IsAsciiDigit(c)) return RunKind::kDigits;
  if (utf8::IsAsciiLetter(c) || (utf8::IsDevanagari(c) && c != 0x0964 && c != 0x0965)) {
    return RunKind::kLetters;
  }
  return RunKind::kOther;
}

std::vector<Run> SplitRuns(std::u32string_view s) {
  std::vector<Run> runs;
  for (char32_t c : s) {
    RunKind k = KindOf(c);
    if (runs.empty() || runs.back().kind != k) runs.push_back({k, {}});
    runs.back().text.push_back(c);
  }
  return runs;
}

}  // namespace

const char* ScriptName(Script s) {
  switch (s) {
    case Script::kDevanagari: return "DEVANAGARI";
    case Script::kLatin: return "LATIN";
    case Script::kNeutral: return "NEUTRAL";
  }
  return "?";
}

const char* ProviderName(ProviderKind k) {
  switch (k) {
    case ProviderKind::kLexicon: return "LEXICON";
    case ProviderKind::kExternal: return "EXTERNAL";
    case ProviderKind::kRuleFallback: return "RULE_FALLBACK";
    case ProviderKind::kNone: return "NONE";
  }
  return "?";
}

const std::vector<std::string>& LetterNameTable() {
  static const std::vector<std::string> table = {
      "ए",  "बी", "सी", "डी",   "ई",    "एफ", "जी",  "एच",   "आई",  "जे", "के",  "एल",    "एम",
      "एन", "ओ", "पी", "क्यू", "आर", "एस", "टी", "यू", "वी", "डब्ल्यू", "एक्स", "वाई", "ज़ेड",
  };
  return table;
}

std::string SpellLetterNames(std::string_view upper_word) {
  std::string out;
  for (char c : upper_word) {
    if (c < 'A' || c > 'Z') throw Error("unmappable grapheme");
    out += LetterNameTable()[static_cast<size_t>(c - 'A')];
  }
  return out;
}

std::string ApplyGraphemeRules(std::string_view word) {
  std::u32string low = utf8::Decode(word);
  for (char32_t& c : low) {
    if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
  }
  auto ascii_piece = [&](size_t at, size_t len, std::string* piece) {
    if (at + len > low.size()) return false;
    piece->clear();
    for (size_t k = 0; k < len; ++k) {
      char32_t d = low[at + k];
      if (d < U'a' || d > U'z') return false;
      *piece += static_cast<char>(d);
    }
    return true;
  };

  std::string out;
  // A consonant was emitted and no vowel has followed it yet; a trailing
  // consonant keeps its inherent schwa.
  bool pending_consonant = false;
  size_t i = 0;
  std::string piece;
  while (i < low.size()) {
    if (utf8::IsDevanagari(low[i])) {
      out += utf8::Encode(low[i]);
      pending_consonant = false;
      ++i;
      continue;
    }
    size_t advance = 0;
    for (size_t len = 3; len >= 1 && advance == 0; --len) {
      if (!ascii_piece(i, len, &piece)) continue;
      for (const auto& v : kVowels) {
        if (piece == v.latin) {
          out += pending_consonant ? v.matra : v.independent;
          pending_consonant = false;
          advance = len;
          break;
        }
      }
      if (advance) break;
      for (const auto& r : kConsonants) {
        if (*r.latin != '\0' && piece == r.latin) {
          if (pending_consonant) out += utf8::Encode(kVirama);
          out += r.devanagari;
          pending_consonant = true;
          advance = len;
          break;
        }
      }
    }
    if (advance == 0) throw Error("unmappable grapheme");
    i += advance;
  }
  return out;
}

std::string ExpandDigits(std::string_view digits) {
  if (digits.empty()) return {};
  for (char c : digits) {
    if (c < '0' || c > '9') throw Error("not a digit string: " + std::string(digits));
  }
  auto digit_wise = [&]() {
    std::string out;
    for (char c : digits) {
      if (!out.empty()) out += ' ';
      out += kUnits[static_cast<size_t>(c - '0')];
    }
    return out;
  };
  if (digits.size() > 4 || (digits.size() > 1 && digits[0] == '0')) return digit_wise();
  int n = std::stoi(std::string(digits));
  if (n < 100) return kUnits[static_cast<size_t>(n)];
  std::string out;
  auto append = [&](const std::string& w) {
    if (!out.empty()) out += ' ';
    out += w;
  };
  if (n >= 1000) {
    append(std::string(kUnits[static_cast<size_t>(n / 1000)]) + " हज़ार");
    n %= 1000;
  }
  if (n >= 100) {
    append(std::string(kUnits[static_cast<size_t>(n / 100)]) + " सौ");
    n %= 100;
  }
  if (n > 0) append(kUnits[static_cast<size_t>(n)]);
  return out;
}

void TransliterationProvider::SetLexicon(std::map<std::string, std::string> lexicon) {
  for (const auto& [k, v] : lexicon) {
    if (HasLatin(utf8::Decode(v))) {
      throw Error("lexicon entry for '" + k + "' contains Latin letters");
    }
  }
  lexicon_ = std::move(lexicon);
}

void TransliterationProvider::LoadLexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lexicon '" + path + "'");
  std::map<std::string, std::string> lex;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error("lexicon '" + path + "' line " + std::to_string(lineno) + ": missing TAB");
    }
    std::string latin = line.substr(0, tab);
    std::string deva = line.substr(tab + 1);
    if (latin.empty() || deva.empty()) {
      throw Error("lexicon '" + path + "' line " + std::to_string(lineno) + ": empty field");
    }
    lex[latin] = deva;
  }
  SetLexicon(std::move(lex));
}

void TransliterationProvider::SetExternalCommand(std::string command,
                                                 std::chrono::milliseconds timeout) {
  external_command_ = std::move(command);
  timeout_ = timeout;
}

const std::string* TransliterationProvider::LexiconFind(const std::string& word) const {
  auto it = lexicon_.find(word);
  if (it != lexicon_.end()) return &it->second;
  it = lexicon_.find(ToLowerAscii(word));
  if (it != lexicon_.end()) return &it->second;
  return nullptr;
}

namespace {

std::string RuleFallback(const std::string& word) {
  std::u32string cps = utf8::Decode(word);
  if (cps.size() <= 5 && IsAllUpperLatin(cps)) return SpellLetterNames(word);
  return ApplyGraphemeRules(word);
}

}  // namespace

std::vector<TransliterationProvider::Result> TransliterationProvider::ResolveAll(
    const std::vector<std::string>& words) const {
  std::vector<Result> results(words.size());
  std::vector<size_t> missing;
  for (size_t i = 0; i < words.size(); ++i) {
    if (const std::string* hit = LexiconFind(words[i])) {
      results[i] = {*hit, ProviderKind::kLexicon};
    } else {
      missing.push_back(i);
    }
  }
  std::vector<bool> done(words.size(), false);
  if (!missing.empty() && !external_command_.empty()) {
    std::vector<std::string> request;
    request.reserve(missing.size());
    for (size_t i : missing) request.push_back(words[i]);
    auto reply = RunLineProtocol(external_command_, request, timeout_);
    if (reply && reply->size() == request.size()) {
      for (size_t k = 0; k < missing.size(); ++k) {
        const std::string& r = (*reply)[k];
        std::u32string cps = utf8::Decode(r);
        bool valid = !cps.empty() && !HasLatin(cps) &&
                     std::none_of(cps.begin(), cps.end(), utf8::IsSpace);
        if (valid) {
          results[missing[k]] = {r, ProviderKind::kExternal};
          done[missing[k]] = true;
        }
      }
    }
  }
  for (size_t i : missing) {
    if (!done[i]) results[i] = {RuleFallback(words[i]), ProviderKind::kRuleFallback};
  }
  return results;
}

TransliterationProvider::Result TransliterationProvider::Resolve(const std::string& word) const {
  return ResolveAll({word}).front();
}

std::string Canonicalize(std::string_view text) {
  std::u32string cps = utf8::Decode(text);
  std::u32string out;
  out.reserve(cps.size());
  bool pending_space = false;
  for (char32_t c : cps) {
    bool keep = utf8::IsDevanagari(c) || utf8::IsAsciiLetter(c) || utf8::IsAsciiDigit(c) ||
                IsRetainedPunct(c);
    if (!keep) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  return utf8::Encode(out);
}

std::vector<Token> Tokenize(std::string_view text) {
  std::u32string cps = utf8::Decode(text);
  std::vector<Token> tokens;
  std::u32string cur;
  auto flush = [&]() {
    if (cur.empty()) return;
    Token t;
    t.surface = utf8::Encode(cur);
    t.script = ClassifyScript(t.surface);
    t.position = static_cast<int>(tokens.size());
    tokens.push_back(std::move(t));
    cur.clear();
  };
  for (char32_t c : cps) {
    if (utf8::IsSpace(c)) {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return tokens;
}

Script ClassifyScript(std::string_view surface) {
  if (surface.empty()) throw Error("empty token");
  std::u32string cps = utf8::Decode(surface);
  bool latin = false;
  bool deva = false;
  for (char32_t c : cps) {
    latin = latin || utf8::IsAsciiLetter(c);
    deva = deva || utf8::IsDevanagari(c);
  }
  if (latin) return Script::kLatin;
  if (deva) return Script::kDevanagari;
  return Script::kNeutral;
}

namespace {

// Rewrites one token given already-resolved transliterations for its Latin
// letter runs (consumed in order from `resolved`).
std::string RewriteToken(const Token& token,
                         const std::vector<TransliterationProvider::Result>& resolved,
                         size_t* cursor) {
  std::vector<Run> runs = SplitRuns(utf8::Decode(token.surface));
  std::string out;
  RunKind prev = RunKind::kOther;
  for (size_t r = 0; r < runs.size(); ++r) {
    const Run& run = runs[r];
    std::string piece;
    switch (run.kind) {
      case RunKind::kLetters:
        if (HasLatin(run.text)) {
          piece = resolved[(*cursor)++].devanagari;
        } else {
          piece = utf8::Encode(run.text);
        }
        break;
      case RunKind::kDigits:
        piece = ExpandDigits(utf8::Encode(run.text));
        break;
      case RunKind::kOther:
        piece = utf8::Encode(run.text);
        break;
    }
    bool boundary = r > 0 && ((run.kind == RunKind::kDigits && prev == RunKind::kLetters) ||
                              (run.kind == RunKind::kLetters && prev == RunKind::kDigits) ||
                              (run.kind == RunKind::kDigits && prev == RunKind::kDigits));
    if (boundary) out += ' ';
    out += piece;
    prev = run.kind;
  }
  return out;
}

std::vector<std::string> LatinRuns(const Token& token) {
  std::vector<std::string> words;
  for (const Run& run : SplitRuns(utf8::Decode(token.surface))) {
    if (run.kind == RunKind::kLetters && HasLatin(run.text)) words.push_back(utf8::Encode(run.text));
  }
  return words;
}

}  // namespace

std::string TransliterateToken(const Token& token, const TransliterationProvider& provider,
                               ProviderKind* used) {
  if (token.script != Script::kLatin) {
    throw Error("transliterate_token: token '" + token.surface + "' is not LATIN");
  }
  std::u32string cps = utf8::Decode(token.surface);
  for (char32_t c : cps) {
    if (!(utf8::IsAsciiLetter(c) || utf8::IsDevanagari(c) || utf8::IsAsciiDigit(c) ||
          IsRetainedPunct(c))) {
      throw Error("unmappable grapheme");
    }
  }
  std::vector<std::string> words = LatinRuns(token);
  auto resolved = provider.ResolveAll(words);
  ProviderKind kind = ProviderKind::kLexicon;
  for (const auto& r : resolved) {
    // Report the weakest provider that contributed.
    if (static_cast<int>(r.kind) > static_cast<int>(kind)) kind = r.kind;
  }
  if (used) *used = kind;
  size_t cursor = 0;
  return RewriteToken(token, resolved, &cursor);
}

NormalizedText Normalize(std::string_view text, const TransliterationProvider& provider) {
  NormalizedText result;
  result.original = std::string(text);
  std::string canonical = Canonicalize(text);
  result.tokens = Tokenize(canonical);

  std::vector<std::string> words;
  std::vector<size_t> first_word(result.tokens.size(), 0);
  for (size_t i = 0; i < result.tokens.size(); ++i) {
    first_word[i] = words.size();
    if (result.tokens[i].script == Script::kLatin) {
      auto w = LatinRuns(result.tokens[i]);
      words.insert(words.end(), w.begin(), w.end());
    }
  }
  std::vector<TransliterationProvider::Result> resolved;
  try {
    resolved = provider.ResolveAll(words);
  } catch (const Error& e) {
    // Re-resolve word by word to attach the failing token position.
    for (size_t i = 0; i < result.tokens.size(); ++i) {
      if (result.tokens[i].script != Script::kLatin) continue;
      try {
        provider.ResolveAll(LatinRuns(result.tokens[i]));
      } catch (const Error& inner) {
        throw Error(std::string(inner.what()) + " at token " + std::to_string(i) + " ('" +
                    result.tokens[i].surface + "')");
      }
    }
    throw;
  }

  std::string out;
  result.provenance.assign(result.tokens.size(), ProviderKind::kNone);
  size_t cursor = 0;
  for (size_t i = 0; i < result.tokens.size(); ++i) {
    const Token& t = result.tokens[i];
    if (t.script == Script::kLatin) {
      ProviderKind kind = ProviderKind::kLexicon;
      size_t n = LatinRuns(t).size();
      for (size_t k = 0; k < n; ++k) {
        auto rk = resolved[first_word[i] + k].kind;
        if (static_cast<int>(rk) > static_cast<int>(kind)) kind = rk;
      }
      result.provenance[i] = kind;
    }
    if (!out.empty()) out += ' ';
    out += RewriteToken(t, resolved, &cursor);
  }
  result.devanagari = out;
  return result;
}

}  // namespace comix::textnorm
