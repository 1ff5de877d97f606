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

#ifndef COMIX_TEXTNORM_H_
#define COMIX_TEXTNORM_H_

#include <chrono>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace comix::textnorm {

enum class Script { kDevanagari, kLatin, kNeutral };
enum class ProviderKind { kLexicon, kExternal, kRuleFallback, kNone };

const char* ScriptName(Script s);
const char* ProviderName(ProviderKind k);

struct Token {
  std::string surface;
  Script script = Script::kNeutral;
  int position = 0;

  bool operator==(const Token&) const = default;
};

// Resolution order for a Latin word: lexicon, then the external command, then
// the shipped rule tables. The rule tables are always available.
class TransliterationProvider {
 public:
  TransliterationProvider() = default;

  void SetLexicon(std::map<std::string, std::string> lexicon);
  // UTF-8 TSV, `latin<TAB>devanagari`, '#' starts a comment.
  void LoadLexicon(const std::string& path);
  void SetExternalCommand(std::string command,
                          std::chrono::milliseconds timeout = std::chrono::seconds(2));

  const std::map<std::string, std::string>& lexicon() const { return lexicon_; }
  const std::string& external_command() const { return external_command_; }

  struct Result {
    std::string devanagari;
    ProviderKind kind = ProviderKind::kRuleFallback;
  };

  // Resolves a batch of Latin words; the external command (if any) is invoked
  // once for every word the lexicon misses. Any external failure falls back to
  // the rule tables and is visible in Result::kind.
  std::vector<Result> ResolveAll(const std::vector<std::string>& words) const;
  Result Resolve(const std::string& word) const;

 private:
  const std::string* LexiconFind(const std::string& word) const;

  std::map<std::string, std::string> lexicon_;
  std::string external_command_;
  std::chrono::milliseconds timeout_{2000};
};

struct NormalizedText {
  std::string original;
  std::string devanagari;
  // Tokens of the canonicalized original text.
  std::vector<Token> tokens;
  // Provider used per token (kNone for tokens with no Latin letters).
  std::vector<ProviderKind> provenance;
};

// Keeps Devanagari, ASCII letters and digits and the punctuation set
// {। . , ? !}; every other code point becomes a space. Whitespace runs
// collapse to one space and the ends are trimmed.
std::string Canonicalize(std::string_view text);

// Splits on whitespace runs.
std::vector<Token> Tokenize(std::string_view text);

// Throws comix::Error("empty token") on "".
Script ClassifyScript(std::string_view surface);

// Returns pure Devanagari for a LATIN token. Throws for non-LATIN tokens and
// when the rule tables meet a character they cannot map.
std::string TransliterateToken(const Token& token, const TransliterationProvider& provider,
                               ProviderKind* used = nullptr);

NormalizedText Normalize(std::string_view text, const TransliterationProvider& provider);

// Rule tables, exposed for tests and tooling.
std::string SpellLetterNames(std::string_view upper_word);
std::string ApplyGraphemeRules(std::string_view word);
// Hindi number words for 0..9999; longer digit strings and strings with a
// leading zero are read digit by digit.
std::string ExpandDigits(std::string_view digits);

// The 26-entry letter-name table, indexed by letter - 'A'.
const std::vector<std::string>& LetterNameTable();

}  // namespace comix::textnorm

#endif  // COMIX_TEXTNORM_H_
