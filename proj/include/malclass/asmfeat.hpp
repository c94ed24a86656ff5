#pragma once

#include <vector>

#include "malclass/asmparse.hpp"
#include "malclass/lexicon.hpp"

namespace malclass {

using FeatureVector = std::vector<double>;

/// [file size in bytes, line count].
FeatureVector extract_md2(const AsmListing& listing);

/// Counts of - + * ] [ ? @ over raw lines, then their total.
FeatureVector extract_sym(const AsmListing& listing);

/// Lines whose mnemonic equals each lexicon opcode.
FeatureVector extract_opc(const AsmListing& listing, const LexiconConfig& lexicon);

/// Whole-word register occurrences inside operand fields.
FeatureVector extract_reg(const AsmListing& listing, const LexiconConfig& lexicon);

/// Whole-word API name occurrences over raw lines.
FeatureVector extract_api(const AsmListing& listing, const LexiconConfig& lexicon);

/// Section layout statistics (25 values).
FeatureVector extract_sec(const AsmListing& listing);

/// Data-define statistics (24 values).
FeatureVector extract_dp(const AsmListing& listing);

/// Keyword frequencies over raw lines.
FeatureVector extract_misc(const AsmListing& listing, const LexiconConfig& lexicon);

/// True for numeric literals such as `0`, `00h`, `0E1h`, `12`; sets value.
bool parse_numeric_literal(std::string_view token, unsigned long long& value);

}  // namespace malclass
