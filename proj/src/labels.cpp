// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#include "kws/labels.hpp"

#include <algorithm>
#include <set>

#include "kws/errors.hpp"

namespace kws {

LabelMap LabelMap::standard() {
  return LabelMap({
      {"zero", "صفر"},       {"one", "واحد"},       {"two", "اثنان"},
      {"three", "ثلاثة"},     {"four", "أربعة"},      {"five", "خمسة"},
      {"six", "ستة"},        {"seven", "سبعة"},      {"eight", "ثمانية"},
      {"nine", "تسعة"},      {"right", "يمين"},      {"left", "يسار"},
      {"up", "أعلى"},        {"down", "أسفل"},       {"front", "أمام"},
      {"back", "خلف"},       {"yes", "نعم"},         {"no", "لا"},
      {"start", "ابدأ"},      {"stop", "توقف"},       {"enable", "تفعيل"},
      {"disable", "تعطيل"},   {"ok", "موافق"},        {"cancel", "إلغاء"},
      {"open", "فتح"},       {"close", "إغلاق"},     {"zoom_in", "تكبير"},
      {"zoom_out", "تصغير"},  {"previous", "السابق"}, {"next", "التالي"},
      {"send", "إرسال"},     {"receive", "استقبال"}, {"move", "تحريك"},
      {"rotate", "تدوير"},    {"record", "تسجيل"},    {"enter", "إدخال"},
      {"digit", "رقم"},      {"direction", "اتجاه"}, {"options", "خيارات"},
      {"undo", "تراجع"},      {std::string(kNullLabel), ""},
  });
}

LabelMap::LabelMap(std::vector<LabelInfo> labels) : labels_(std::move(labels)) {
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.alias.empty()) throw LabelError("empty label alias");
    if (!seen.insert(l.alias).second) throw LabelError("duplicate label: " + l.alias);
  }
  if (!seen.contains(std::string(kNullLabel))) throw LabelError("label map lacks NULL");
}

const std::string& LabelMap::name(std::size_t index) const {
  if (index >= labels_.size()) throw IndexError("label index out of range: " + std::to_string(index));
  return labels_[index].alias;
}

const std::string& LabelMap::display(std::size_t index) const {
  if (index >= labels_.size()) throw IndexError("label index out of range: " + std::to_string(index));
  return labels_[index].display.empty() ? labels_[index].alias : labels_[index].display;
}

std::optional<std::size_t> LabelMap::find(std::string_view alias) const {
  auto it = std::find_if(labels_.begin(), labels_.end(),
                         [&](const LabelInfo& l) { return l.alias == alias; });
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

std::size_t LabelMap::index(std::string_view alias) const {
  if (auto i = find(alias)) return *i;
  throw LabelError("unknown label: " + std::string(alias));
}

}  // namespace kws
