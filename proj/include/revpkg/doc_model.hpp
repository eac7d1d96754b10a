#pragma once

// Page-indexed, anchor-addressable view of a parsed manuscript.
//
// A manuscript arrives as an ordered block list (one record per parser
// block). Each block becomes one line on its page; lines are addressed by
// 1-based (page, k_start, k_end) anchors. Boxes are optional: when every
// line in a span carries one, the span resolves to exact per-line rects,
// otherwise callers use the line-ratio fallback in normalized 0-100 units.

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace revpkg {

enum class BlockKind { kHeader, kText, kEquation, kTable, kImage, kCaption };

std::string_view to_string(BlockKind kind);
std::optional<BlockKind> parse_block_kind(std::string_view text);

enum class CoordSpace { kPageLocal, kNormalized };

struct Rect {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;
  CoordSpace space = CoordSpace::kPageLocal;

  bool well_formed() const { return x_min < x_max && y_min < y_max; }
  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  // Open-interior intersection; rects sharing only an edge are disjoint.
  bool overlaps(const Rect& other) const;

  friend bool operator==(const Rect&, const Rect&) = default;
};

struct BlockRecord {
  int page = 0;
  std::string text;
  BlockKind kind = BlockKind::kText;
  std::optional<Rect> bbox;
};

struct Line {
  std::string text;
  BlockKind kind = BlockKind::kText;
  std::optional<Rect> bbox;

  friend bool operator==(const Line&, const Line&) = default;
};

struct Anchor {
  int page = 0;
  int k_start = 0;
  int k_end = 0;

  int length() const { return k_end - k_start + 1; }
  // True when `inner` lies entirely on this span's page and line range.
  bool contains(const Anchor& inner) const;
  bool intersects(const Anchor& other) const;

  friend auto operator<=>(const Anchor&, const Anchor&) = default;
};

std::string to_string(const Anchor& anchor);

struct PageScale {
  double width = 0;
  double height = 0;

  friend bool operator==(const PageScale&, const PageScale&) = default;
};

// Page -> line count. Enough to validate anchors without the text.
class PageIndex {
 public:
  PageIndex() = default;
  explicit PageIndex(std::map<int, int> line_counts);

  bool has_page(int page) const { return line_counts_.contains(page); }
  // 0 when the page does not exist.
  int line_count(int page) const;
  bool is_valid(const Anchor& anchor) const;
  // Throws AnchorOutOfRange.
  void require_valid(const Anchor& anchor) const;
  const std::map<int, int>& line_counts() const { return line_counts_; }

  friend bool operator==(const PageIndex&, const PageIndex&) = default;

 private:
  std::map<int, int> line_counts_;
};

class AnchoredDocument {
 public:
  AnchoredDocument() = default;

  const std::string& id() const { return id_; }
  std::vector<int> page_numbers() const;
  bool has_page(int page) const { return pages_.contains(page); }
  // Throws AnchorOutOfRange for a missing page.
  const std::vector<Line>& lines(int page) const;
  int line_count(int page) const { return index_.line_count(page); }
  std::optional<PageScale> ref_scale(int page) const;
  const PageIndex& page_index() const { return index_; }

  bool is_valid(const Anchor& anchor) const { return index_.is_valid(anchor); }
  void require_valid(const Anchor& anchor) const { index_.require_valid(anchor); }
  // Lines k_start..k_end of the anchor, in order.
  std::vector<Line> read(const Anchor& anchor) const;

 private:
  friend AnchoredDocument ingest_block_list(std::span<const BlockRecord>,
                                            std::string);

  std::string id_;
  std::map<int, std::vector<Line>> pages_;
  std::map<int, PageScale> scales_;
  PageIndex index_;
};

// Throws EmptyDocument or MalformedBlock(index).
AnchoredDocument ingest_block_list(std::span<const BlockRecord> blocks,
                                   std::string doc_id = {});

// Block-list interchange: one JSON object per line with `page`, `kind`,
// `text` and an optional `bbox` [x_min, y_min, x_max, y_max]. Blank lines
// are skipped; unknown fields are ignored.
std::vector<BlockRecord> read_block_list(std::istream& in);
std::vector<BlockRecord> read_block_list_file(const std::string& path);
void write_block_list(std::ostream& out, std::span<const BlockRecord> blocks);

// Exact per-line boxes for the span. Throws AnchorOutOfRange, or
// FallbackRequired when any line in the span has no box.
std::vector<Rect> resolve_anchor_rects(const AnchoredDocument& doc,
                                       const Anchor& anchor);

// Line-ratio approximation in normalized 0-100 units with x fixed to [8, 92].
Rect fallback_rect(const AnchoredDocument& doc, const Anchor& anchor);

inline constexpr double kFallbackXMin = 8.0;
inline constexpr double kFallbackXMax = 92.0;

struct Highlight {
  std::vector<Rect> rects;  // normalized 0-100
  bool approximate = false;

  friend bool operator==(const Highlight&, const Highlight&) = default;
};

// Routes to exact boxes (normalized by the page reference scale) or to the
// whole-span fallback when any box is missing.
Highlight highlight_for(const AnchoredDocument& doc, const Anchor& anchor);

// Page-local rect scaled by (W_p, H_p) into 0-100 units.
Rect normalize(const Rect& rect, const PageScale& scale);

void to_json(nlohmann::json& j, const Rect& r);
void from_json(const nlohmann::json& j, Rect& r);
void to_json(nlohmann::json& j, const Anchor& a);
void from_json(const nlohmann::json& j, Anchor& a);
void to_json(nlohmann::json& j, const PageIndex& index);
void from_json(const nlohmann::json& j, PageIndex& index);

}  // namespace revpkg
