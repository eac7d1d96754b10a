#include "revpkg/annotations.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "revpkg/error.hpp"

namespace revpkg {

namespace {

constexpr std::string_view kFixedCategories[] = {
    "Novelty", "Clarity", "Presentation", "Soundness", "Experiments", "Ethics", "Other"};

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

std::size_t codepoints(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(
      s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

Rect hull(const std::vector<Rect>& rects) {
  Rect h = rects.front();
  for (const Rect& r : rects) {
    h.x_min = std::min(h.x_min, r.x_min);
    h.y_min = std::min(h.y_min, r.y_min);
    h.x_max = std::max(h.x_max, r.x_max);
    h.y_max = std::max(h.y_max, r.y_max);
  }
  return h;
}

Connector connect(const Rect& from, const Rect& to) {
  return Connector{from.x_max, (from.y_min + from.y_max) / 2, to.x_min,
                   (to.y_min + to.y_max) / 2};
}

}  // namespace

std::string_view to_string(Severity severity) {
  return severity == Severity::kMajor ? "major" : "minor";
}

std::optional<Severity> parse_severity(std::string_view text) {
  if (text == "major") return Severity::kMajor;
  if (text == "minor") return Severity::kMinor;
  return std::nullopt;
}

CategoryTaxonomy::CategoryTaxonomy(std::optional<std::string> extra_label)
    : extra_(std::move(extra_label)) {
  if (extra_ && blank(*extra_)) extra_.reset();
}

bool CategoryTaxonomy::contains(std::string_view label) const {
  if (std::find(std::begin(kFixedCategories), std::end(kFixedCategories), label) !=
      std::end(kFixedCategories)) {
    return true;
  }
  return extra_ && *extra_ == label;
}

std::vector<std::string> CategoryTaxonomy::labels() const {
  std::vector<std::string> out(std::begin(kFixedCategories), std::end(kFixedCategories));
  if (extra_) out.push_back(*extra_);
  return out;
}

std::string callout_text(const Annotation& ann) {
  return fmt::format("[{} | {}] {}\nRisk: {}\nRepair: {}", ann.category,
                     to_string(ann.severity), ann.summary, ann.risk_text,
                     ann.repair_text);
}

std::string_view to_string(AnnotationViolation v) {
  switch (v) {
    case AnnotationViolation::kMissingId: return "MissingId";
    case AnnotationViolation::kAnchorOutOfRange: return "AnchorOutOfRange";
    case AnnotationViolation::kMissingRiskText: return "MissingRiskText";
    case AnnotationViolation::kMissingRepairAction: return "MissingRepairAction";
    case AnnotationViolation::kMissingSummary: return "MissingSummary";
    case AnnotationViolation::kUnknownCategory: return "UnknownCategory";
  }
  return "Unknown";
}

std::vector<AnnotationViolation> validate_annotation(const Annotation& ann,
                                                     const PageIndex& pages,
                                                     const CategoryTaxonomy& taxonomy) {
  std::vector<AnnotationViolation> out;
  if (blank(ann.ann_id)) out.push_back(AnnotationViolation::kMissingId);
  if (!pages.is_valid(ann.anchor)) out.push_back(AnnotationViolation::kAnchorOutOfRange);
  if (blank(ann.risk_text)) out.push_back(AnnotationViolation::kMissingRiskText);
  if (blank(ann.repair_text)) out.push_back(AnnotationViolation::kMissingRepairAction);
  if (blank(ann.summary)) out.push_back(AnnotationViolation::kMissingSummary);
  if (!taxonomy.contains(ann.category)) out.push_back(AnnotationViolation::kUnknownCategory);
  return out;
}

double estimate_callout_height(std::string_view text, const LayoutParams& params) {
  double lines = 0;
  std::size_t start = 0;
  // Each hard line wraps independently.
  while (true) {
    const std::size_t nl = text.find('\n', start);
    const std::string_view part =
        text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    lines += std::max(1.0, std::ceil(static_cast<double>(codepoints(part)) /
                                     params.chars_per_line));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines * params.line_height + 2 * params.padding;
}

Rect margin_zone(const LayoutParams& params) {
  return Rect{100.0 * (1.0 - params.margin_fraction), 0.0, 100.0, 100.0,
              CoordSpace::kNormalized};
}

PageLayout layout_callouts(int page, std::span<const CalloutRequest> requests,
                           const Rect& margin, const LayoutParams& params) {
  if (!margin.well_formed()) {
    throw Error(ErrorCode::kBadGeometry,
                fmt::format("margin zone on page {} has nonpositive area", page));
  }
  if (params.chars_per_line <= 0 || params.line_height <= 0 ||
      params.index_card_height <= 0 || params.gap < 0 || params.padding < 0) {
    throw Error(ErrorCode::kBadGeometry, "layout parameters must be positive");
  }

  std::vector<std::size_t> order(requests.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Rect& ra = requests[a].highlight_box;
    const Rect& rb = requests[b].highlight_box;
    if (ra.y_min != rb.y_min) return ra.y_min < rb.y_min;
    if (ra.x_min != rb.x_min) return ra.x_min < rb.x_min;
    return requests[a].ann_id < requests[b].ann_id;
  });

  PageLayout out;
  ContinuationSheet sheet;
  sheet.sheet_id = fmt::format("cont-p{}", page);

  const double card = params.index_card_height;
  double cursor = margin.y_min;
  bool overflowed = false;
  const std::size_t n = order.size();

  auto place = [&](double height, double preferred, double reserve) -> std::optional<Rect> {
    double top = std::min(std::max(cursor, preferred), margin.y_max - height - reserve);
    if (top < cursor) return std::nullopt;
    return Rect{margin.x_min, top, margin.x_max, top + height, CoordSpace::kNormalized};
  };

  for (std::size_t pos = 0; pos < n; ++pos) {
    const CalloutRequest& req = requests[order[pos]];
    CalloutPlacement pl;
    pl.ann_id = req.ann_id;
    pl.marker = Marker{page, static_cast<int>(pos) + 1};
    const double later = static_cast<double>(n - pos - 1);
    const double card_reserve = later * (card + params.gap);
    const double preferred = req.highlight_box.y_min;

    std::optional<Rect> rect;
    if (!overflowed) {
      const double h = estimate_callout_height(req.text, params);
      if (h <= params.max_callout_height) {
        rect = place(h, preferred, card_reserve);
        if (!rect) overflowed = true;
      }
    }
    if (!rect) {
      pl.continued = true;
      rect = place(card, preferred, card_reserve);
      if (!rect && cursor + card <= margin.y_max) {
        rect = Rect{margin.x_min, cursor, margin.x_max, cursor + card,
                    CoordSpace::kNormalized};
      }
      sheet.entries.push_back({req.ann_id, req.text});
      sheet.back_links.push_back(pl.marker);
    }
    if (rect) {
      pl.callout_rect = rect;
      pl.connector = connect(req.highlight_box, *rect);
      cursor = rect->y_max + params.gap;
    }
    out.placements.push_back(std::move(pl));
  }
  if (!sheet.entries.empty()) out.sheets.push_back(std::move(sheet));
  return out;
}

OverlayPlan render_overlay_plan(const AnchoredDocument& doc,
                                std::span<const Annotation> anns,
                                const LayoutParams& params) {
  std::set<std::string> ids;
  for (const Annotation& a : anns) {
    if (!ids.insert(a.ann_id).second) {
      throw Error(ErrorCode::kDuplicateAnnotation,
                  fmt::format("annotation id '{}' appears twice", a.ann_id));
    }
    doc.require_valid(a.anchor);
  }
  const Rect margin = margin_zone(params);

  std::map<int, std::vector<const Annotation*>> by_page;
  for (const Annotation& a : anns) by_page[a.anchor.page].push_back(&a);

  OverlayPlan plan;
  for (const auto& [page, page_anns] : by_page) {
    std::map<std::string, Highlight> highlights;
    std::vector<CalloutRequest> requests;
    for (const Annotation* a : page_anns) {
      Highlight h = highlight_for(doc, a->anchor);
      requests.push_back({a->ann_id, hull(h.rects), callout_text(*a)});
      highlights.emplace(a->ann_id, std::move(h));
    }
    PageLayout layout = layout_callouts(page, requests, margin, params);

    PagePlan pp;
    pp.page = page;
    pp.margin = margin;
    for (const CalloutPlacement& pl : layout.placements) {
      pp.highlights.push_back({pl.ann_id, highlights.at(pl.ann_id)});
    }
    pp.placements = std::move(layout.placements);
    pp.sheets = std::move(layout.sheets);
    plan.pages.push_back(std::move(pp));
  }
  return plan;
}

void to_json(nlohmann::json& j, const Severity& s) { j = std::string(to_string(s)); }

void from_json(const nlohmann::json& j, Severity& s) {
  auto parsed = parse_severity(j.get<std::string>());
  if (!parsed) {
    throw Error(ErrorCode::kMalformedProviderOutput,
                fmt::format("unknown severity '{}'", j.get<std::string>()));
  }
  s = *parsed;
}

void to_json(nlohmann::json& j, const Annotation& a) {
  j = {{"ann_id", a.ann_id},     {"anchor", a.anchor},   {"category", a.category},
       {"severity", a.severity}, {"risk", a.risk_text},  {"repair", a.repair_text},
       {"summary", a.summary},   {"body", a.body}};
  if (a.claim_id) j["claim_id"] = *a.claim_id;
}

void from_json(const nlohmann::json& j, Annotation& a) {
  j.at("ann_id").get_to(a.ann_id);
  j.at("anchor").get_to(a.anchor);
  a.category = j.value("category", std::string{});
  j.at("severity").get_to(a.severity);
  a.risk_text = j.value("risk", std::string{});
  a.repair_text = j.value("repair", std::string{});
  a.summary = j.value("summary", std::string{});
  a.body = j.value("body", std::string{});
  a.claim_id.reset();
  if (auto it = j.find("claim_id"); it != j.end() && it->is_string()) {
    a.claim_id = it->get<std::string>();
  }
}

namespace {

nlohmann::json marker_json(const Marker& m) { return {{"page", m.page}, {"index", m.index}}; }

Marker marker_from(const nlohmann::json& j) {
  return Marker{j.at("page").get<int>(), j.at("index").get<int>()};
}

}  // namespace

void to_json(nlohmann::json& j, const OverlayPlan& plan) {
  nlohmann::json pages = nlohmann::json::array();
  for (const PagePlan& pp : plan.pages) {
    nlohmann::json hl = nlohmann::json::array();
    for (const PageHighlight& h : pp.highlights) {
      hl.push_back({{"ann_id", h.ann_id},
                    {"approximate", h.highlight.approximate},
                    {"rects", h.highlight.rects}});
    }
    nlohmann::json pls = nlohmann::json::array();
    for (const CalloutPlacement& pl : pp.placements) {
      nlohmann::json p = {{"ann_id", pl.ann_id},
                          {"marker", marker_json(pl.marker)},
                          {"continued", pl.continued}};
      p["callout_rect"] = pl.callout_rect ? nlohmann::json(*pl.callout_rect) : nlohmann::json();
      if (pl.connector) {
        p["connector"] = {{"from", {pl.connector->from_x, pl.connector->from_y}},
                          {"to", {pl.connector->to_x, pl.connector->to_y}}};
      } else {
        p["connector"] = nullptr;
      }
      pls.push_back(std::move(p));
    }
    nlohmann::json sheets = nlohmann::json::array();
    for (const ContinuationSheet& s : pp.sheets) {
      nlohmann::json entries = nlohmann::json::array();
      for (std::size_t i = 0; i < s.entries.size(); ++i) {
        entries.push_back({{"ann_id", s.entries[i].ann_id},
                           {"body", s.entries[i].body},
                           {"back_link", marker_json(s.back_links[i])}});
      }
      sheets.push_back({{"sheet_id", s.sheet_id}, {"entries", std::move(entries)}});
    }
    pages.push_back({{"page", pp.page},
                     {"margin", pp.margin},
                     {"highlights", std::move(hl)},
                     {"placements", std::move(pls)},
                     {"sheets", std::move(sheets)}});
  }
  j = {{"coordinate_space", "normalized_0_100"}, {"pages", std::move(pages)}};
}

void from_json(const nlohmann::json& j, OverlayPlan& plan) {
  plan.pages.clear();
  for (const auto& pj : j.at("pages")) {
    PagePlan pp;
    pp.page = pj.at("page").get<int>();
    pj.at("margin").get_to(pp.margin);
    for (const auto& hj : pj.at("highlights")) {
      PageHighlight h;
      h.ann_id = hj.at("ann_id").get<std::string>();
      h.highlight.approximate = hj.value("approximate", false);
      hj.at("rects").get_to(h.highlight.rects);
      pp.highlights.push_back(std::move(h));
    }
    for (const auto& plj : pj.at("placements")) {
      CalloutPlacement pl;
      pl.ann_id = plj.at("ann_id").get<std::string>();
      pl.marker = marker_from(plj.at("marker"));
      pl.continued = plj.value("continued", false);
      if (auto it = plj.find("callout_rect"); it != plj.end() && !it->is_null()) {
        pl.callout_rect = it->get<Rect>();
      }
      if (auto it = plj.find("connector"); it != plj.end() && !it->is_null()) {
        const auto& from = it->at("from");
        const auto& to = it->at("to");
        pl.connector = Connector{from.at(0).get<double>(), from.at(1).get<double>(),
                                 to.at(0).get<double>(), to.at(1).get<double>()};
      }
      pp.placements.push_back(std::move(pl));
    }
    for (const auto& sj : pj.at("sheets")) {
      ContinuationSheet s;
      s.sheet_id = sj.at("sheet_id").get<std::string>();
      for (const auto& ej : sj.at("entries")) {
        s.entries.push_back({ej.at("ann_id").get<std::string>(),
                             ej.value("body", std::string{})});
        s.back_links.push_back(marker_from(ej.at("back_link")));
      }
      pp.sheets.push_back(std::move(s));
    }
    plan.pages.push_back(std::move(pp));
  }
}

}  // namespace revpkg
