#pragma once

#include <array>
#include <cctype>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "rslogit/core.hpp"
#include "rslogit/format.hpp"
#include "rslogit/io.hpp"

namespace rslogit {

enum class ClinicalValue { Positive, Negative, Indeterminate, Equivocal, Missing };

inline constexpr std::array<ClinicalValue, 5> kAllClinicalValues = {
    ClinicalValue::Positive, ClinicalValue::Negative, ClinicalValue::Indeterminate, ClinicalValue::Equivocal,
    ClinicalValue::Missing};

inline const char* clinicalName(ClinicalValue v) {
  switch (v) {
    case ClinicalValue::Positive: return "positive";
    case ClinicalValue::Negative: return "negative";
    case ClinicalValue::Indeterminate: return "indeterminate";
    case ClinicalValue::Equivocal: return "equivocal";
    default: return "missing";
  }
}

/**
 * Case-insensitive parse of a clinical field. Accepts the words and common
 * abbreviations ("pos", "(+)", "(-)", "ind", "equiv"; a Unicode minus reads
 * as '-'), IHC scores (0 and 1+ are negative, 2+ equivocal, 3+ positive) and
 * missing tokens ("", "NA", "[Not Evaluated]", "[Not Available]", "unknown").
 */
inline std::optional<ClinicalValue> parseClinicalValue(std::string_view raw) {
  std::string s;
  for (char c : detail::trim(raw)) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  if (s.size() >= 2 && s.front() == '(' && s.back() == ')') s = s.substr(1, s.size() - 2);
  if (s.empty() || s == "na" || s == "nan" || s == "missing" || s == "not evaluated" || s == "not available" ||
      s == "unknown" || s == "not performed")
    return ClinicalValue::Missing;
  if (s == "positive" || s == "pos" || s == "+" || s == "3+") return ClinicalValue::Positive;
  if (s == "negative" || s == "neg" || s == "-" || s == "\xE2\x88\x92" || s == "0" || s == "1+") return ClinicalValue::Negative;
  if (s == "equivocal" || s == "equiv" || s == "2+") return ClinicalValue::Equivocal;
  if (s == "indeterminate" || s == "ind") return ClinicalValue::Indeterminate;
  return std::nullopt;
}

struct ClinicalRecord {
  std::string individualId;
  ClinicalValue erStatus = ClinicalValue::Missing;
  ClinicalValue prStatus = ClinicalValue::Missing;
  ClinicalValue her2IhcLevel = ClinicalValue::Missing;
  ClinicalValue her2IhcStatus = ClinicalValue::Missing;
  ClinicalValue her2FishStatus = ClinicalValue::Missing;
};

enum class LabelClass { NonTnbc = 0, Tnbc = 1, Unlabelable = -1 };
enum class Her2Source { Fish, IhcStatus };

struct LabelResult {
  LabelClass label = LabelClass::Unlabelable;
  Her2Source her2Source = Her2Source::IhcStatus;
  ClinicalValue effectiveHer2 = ClinicalValue::Missing;
  bool suspect = false;
  std::string suspectReason;
};

/// One value positive and the other negative.
inline bool discordant(ClinicalValue a, ClinicalValue b) {
  return (a == ClinicalValue::Positive && b == ClinicalValue::Negative) ||
         (a == ClinicalValue::Negative && b == ClinicalValue::Positive);
}

/**
 * TNBC label. HER2 is taken from FISH when FISH is not missing, otherwise
 * from the IHC status. Label 1 needs ER, PR and HER2 all negative; any
 * positive among them gives 0; anything else (indeterminate, equivocal,
 * missing) leaves the record unlabelable. The record is suspect when the IHC
 * level disagrees with the IHC status or the IHC status with FISH.
 */
inline LabelResult deriveLabel(const ClinicalRecord& rec) {
  LabelResult out;
  const bool fish = rec.her2FishStatus != ClinicalValue::Missing;
  out.her2Source = fish ? Her2Source::Fish : Her2Source::IhcStatus;
  out.effectiveHer2 = fish ? rec.her2FishStatus : rec.her2IhcStatus;
  const std::array<ClinicalValue, 3> decisive = {rec.erStatus, rec.prStatus, out.effectiveHer2};
  bool allNeg = true, anyPos = false;
  for (auto v : decisive) {
    allNeg = allNeg && v == ClinicalValue::Negative;
    anyPos = anyPos || v == ClinicalValue::Positive;
  }
  out.label = allNeg ? LabelClass::Tnbc : anyPos ? LabelClass::NonTnbc : LabelClass::Unlabelable;

  std::vector<std::string> reasons;
  if (discordant(rec.her2IhcLevel, rec.her2IhcStatus))
    reasons.push_back(std::string("IHC level ") + clinicalName(rec.her2IhcLevel) + " vs IHC status " +
                      clinicalName(rec.her2IhcStatus));
  if (discordant(rec.her2IhcStatus, rec.her2FishStatus))
    reasons.push_back(std::string("IHC status ") + clinicalName(rec.her2IhcStatus) + " vs FISH " +
                      clinicalName(rec.her2FishStatus));
  out.suspect = !reasons.empty();
  for (std::size_t k = 0; k < reasons.size(); ++k) out.suspectReason += (k ? "; " : "") + reasons[k];
  return out;
}

struct ClinicalColumns {
  std::string id = "id";
  std::string er = "er_status";
  std::string pr = "pr_status";
  std::string her2IhcLevel = "her2_ihc_level";
  std::string her2IhcStatus = "her2_ihc_status";
  std::string her2Fish = "her2_fish_status";
};

/// Clinical table to records. Header matching ignores case; absent HER2 columns read as missing.
inline std::vector<ClinicalRecord> clinicalFromTable(const Table& t, const ClinicalColumns& cols = {}) {
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  auto find = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
    for (std::size_t c = 0; c < t.header.size(); ++c)
      if (lower(t.header[c]) == lower(name)) return c;
    if (required) throw DataError(t.source + ": missing column '" + name + "'");
    return std::nullopt;
  };
  const auto idCol = find(cols.id, true);
  const auto erCol = find(cols.er, true);
  const auto prCol = find(cols.pr, true);
  const auto levelCol = find(cols.her2IhcLevel, false);
  const auto statusCol = find(cols.her2IhcStatus, false);
  const auto fishCol = find(cols.her2Fish, false);

  std::vector<ClinicalRecord> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto field = [&](std::optional<std::size_t> c) {
      if (!c) return ClinicalValue::Missing;
      auto v = parseClinicalValue(t.rows[r][*c]);
      if (!v) throw DataError(t.where(r, *c) + ": unrecognized value '" + t.rows[r][*c] + "'");
      return *v;
    };
    ClinicalRecord rec;
    rec.individualId = t.rows[r][*idCol];
    rec.erStatus = field(erCol);
    rec.prStatus = field(prCol);
    rec.her2IhcLevel = field(levelCol);
    rec.her2IhcStatus = field(statusCol);
    rec.her2FishStatus = field(fishCol);
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::string labelText(LabelClass c) {
  switch (c) {
    case LabelClass::Tnbc: return "1";
    case LabelClass::NonTnbc: return "0";
    default: return "NA";
  }
}

/// CSV: id,label,her2_source,her2_effective,suspect,suspect_reason.
inline void writeLabels(std::ostream& os, const std::vector<ClinicalRecord>& recs,
                        const std::vector<LabelResult>& labels) {
  os << "id,label,her2_source,her2_effective,suspect,suspect_reason\n";
  for (std::size_t k = 0; k < recs.size(); ++k) {
    const auto& l = labels.at(k);
    os << csvField(recs[k].individualId) << ',' << labelText(l.label) << ','
       << (l.her2Source == Her2Source::Fish ? "FISH" : "IHC-status") << ',' << clinicalName(l.effectiveHer2) << ','
       << (l.suspect ? 1 : 0) << ',' << csvField(l.suspectReason) << '\n';
  }
}

}  // namespace rslogit
