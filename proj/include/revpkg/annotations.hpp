#pragma once

// Anchored annotations, their validation, and the overlay render plan
// (highlights, right-margin callouts, continuation sheets).

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "revpkg/doc_model.hpp"

namespace revpkg {

enum class Severity { kMajor, kMinor };

std::string_view to_string(Severity severity);
std::optional<Severity> parse_severity(std::string_view text);

// Seven fixed issue categories plus an optional configured eighth label.
class CategoryTaxonomy {
 public:
  CategoryTaxonomy() = default;
  explicit CategoryTaxonomy(std::optional<std::string> extra_label);

  bool contains(std::string_view label) const;
  std::vector<std::string> labels() const;
  const std::optional<std::string>& extra_label() const { return extra_; }

 private:
  std::optional<std::string> extra_;
};

struct Annotation {
  std::string ann_id;
  Anchor anchor;
  std::string category;
  Severity severity = Severity::kMinor;
  std::string risk_text;
  std::string repair_text;
  std::string summary;
  std::string body;
  std::optional<std::string> claim_id;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

// Text shown in the margin callout (and moved to a sheet when it overflows).
std::string callout_text(const Annotation& ann);

enum class AnnotationViolation {
  kMissingId,
  kAnchorOutOfRange,
  kMissingRiskText,
  kMissingRepairAction,
  kMissingSummary,
  kUnknownCategory,
};

std::string_view to_string(AnnotationViolation v);

// Every violation, not just the first. Empty means valid.
std::vector<AnnotationViolation> validate_annotation(
    const Annotation& ann, const PageIndex& pages,
    const CategoryTaxonomy& taxonomy = {});

struct LayoutParams {
  double margin_fraction = 0.25;  // rightmost share of the page width
  double chars_per_line = 34;
  double line_height = 1.9;
  double padding = 0.8;
  double gap = 0.6;
  double index_card_height = 3.2;
  double max_callout_height = 45;
};

double estimate_callout_height(std::string_view text, const LayoutParams& params);

// Right-margin zone of a normalized page.
Rect margin_zone(const LayoutParams& params);

struct CalloutRequest {
  std::string ann_id;
  Rect highlight_box;  // hull of the annotation's highlight rects
  std::string text;
};

struct Marker {
  int page = 0;
  int index = 0;  // 1..n per page in highlight vertical order

  friend bool operator==(const Marker&, const Marker&) = default;
};

struct Connector {
  double from_x = 0;
  double from_y = 0;
  double to_x = 0;
  double to_y = 0;

  friend bool operator==(const Connector&, const Connector&) = default;
};

struct CalloutPlacement {
  std::string ann_id;
  Marker marker;
  // Full callout, or the compact index card when continued. Absent only if
  // even the card has no room left in the margin.
  std::optional<Rect> callout_rect;
  std::optional<Connector> connector;
  bool continued = false;

  friend bool operator==(const CalloutPlacement&, const CalloutPlacement&) = default;
};

struct ContinuationEntry {
  std::string ann_id;
  std::string body;

  friend bool operator==(const ContinuationEntry&, const ContinuationEntry&) = default;
};

struct ContinuationSheet {
  std::string sheet_id;
  std::vector<ContinuationEntry> entries;
  std::vector<Marker> back_links;  // parallel to entries

  friend bool operator==(const ContinuationSheet&, const ContinuationSheet&) = default;
};

struct PageLayout {
  std::vector<CalloutPlacement> placements;
  std::vector<ContinuationSheet> sheets;
};

// Greedy top-down packing in highlight order. Each full callout must leave
// room for index cards of every later annotation; the first callout that
// cannot fit ends inline placement and everything after it is continued.
// A callout taller than max_callout_height is continued on its own.
// Throws BadGeometry for a margin zone with nonpositive area.
PageLayout layout_callouts(int page, std::span<const CalloutRequest> requests,
                           const Rect& margin, const LayoutParams& params);

struct PageHighlight {
  std::string ann_id;
  Highlight highlight;

  friend bool operator==(const PageHighlight&, const PageHighlight&) = default;
};

struct PagePlan {
  int page = 0;
  Rect margin;
  std::vector<PageHighlight> highlights;
  std::vector<CalloutPlacement> placements;
  std::vector<ContinuationSheet> sheets;

  friend bool operator==(const PagePlan&, const PagePlan&) = default;
};

struct OverlayPlan {
  std::vector<PagePlan> pages;

  friend bool operator==(const OverlayPlan&, const OverlayPlan&) = default;
};

// Throws DuplicateAnnotation, AnchorOutOfRange, BadGeometry.
OverlayPlan render_overlay_plan(const AnchoredDocument& doc,
                                std::span<const Annotation> anns,
                                const LayoutParams& params = {});

void to_json(nlohmann::json& j, const Annotation& a);
void from_json(const nlohmann::json& j, Annotation& a);
void to_json(nlohmann::json& j, const OverlayPlan& plan);
void from_json(const nlohmann::json& j, OverlayPlan& plan);
void to_json(nlohmann::json& j, const Severity& s);
void from_json(const nlohmann::json& j, Severity& s);

}  // namespace revpkg
