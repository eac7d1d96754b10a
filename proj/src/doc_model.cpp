#include "revpkg/doc_model.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "revpkg/error.hpp"

namespace revpkg {

namespace {

constexpr std::pair<BlockKind, std::string_view> kKindNames[] = {
    {BlockKind::kHeader, "header"},     {BlockKind::kText, "text"},
    {BlockKind::kEquation, "equation"}, {BlockKind::kTable, "table"},
    {BlockKind::kImage, "image"},       {BlockKind::kCaption, "caption"},
};

BlockRecord parse_block(const nlohmann::json& j, std::size_t index) {
  auto malformed = [index](const std::string& why) {
    return Error(ErrorCode::kMalformedBlock,
                 fmt::format("record {}: {}", index, why), index);
  };
  if (!j.is_object()) throw malformed("not an object");
  BlockRecord block;
  auto page = j.find("page");
  if (page == j.end() || !page->is_number_integer()) {
    throw malformed("missing integer page");
  }
  block.page = page->get<int>();
  auto kind = j.find("kind");
  if (kind == j.end() || !kind->is_string()) throw malformed("missing kind");
  auto parsed = parse_block_kind(kind->get<std::string>());
  if (!parsed) {
    throw malformed(fmt::format("unknown kind '{}'", kind->get<std::string>()));
  }
  block.kind = *parsed;
  if (auto text = j.find("text"); text != j.end() && !text->is_null()) {
    if (!text->is_string()) throw malformed("text is not a string");
    block.text = text->get<std::string>();
  }
  if (auto bbox = j.find("bbox"); bbox != j.end() && !bbox->is_null()) {
    if (!bbox->is_array() || bbox->size() != 4) {
      throw malformed("bbox must be a 4-array");
    }
    for (const auto& v : *bbox) {
      if (!v.is_number()) throw malformed("bbox entries must be numbers");
    }
    block.bbox = Rect{(*bbox)[0].get<double>(), (*bbox)[1].get<double>(),
                      (*bbox)[2].get<double>(), (*bbox)[3].get<double>(),
                      CoordSpace::kPageLocal};
  }
  return block;
}

}  // namespace

std::string_view to_string(BlockKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "text";
}

std::optional<BlockKind> parse_block_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

bool Rect::overlaps(const Rect& other) const {
  return x_min < other.x_max && other.x_min < x_max && y_min < other.y_max &&
         other.y_min < y_max;
}

bool Anchor::contains(const Anchor& inner) const {
  return page == inner.page && k_start <= inner.k_start && inner.k_end <= k_end;
}

bool Anchor::intersects(const Anchor& other) const {
  return page == other.page && k_start <= other.k_end &&
         other.k_start <= k_end;
}

std::string to_string(const Anchor& anchor) {
  return fmt::format("p{}:{}-{}", anchor.page, anchor.k_start, anchor.k_end);
}

PageIndex::PageIndex(std::map<int, int> line_counts)
    : line_counts_(std::move(line_counts)) {}

int PageIndex::line_count(int page) const {
  auto it = line_counts_.find(page);
  return it == line_counts_.end() ? 0 : it->second;
}

bool PageIndex::is_valid(const Anchor& anchor) const {
  const int lines = line_count(anchor.page);
  return lines > 0 && 1 <= anchor.k_start && anchor.k_start <= anchor.k_end &&
         anchor.k_end <= lines;
}

void PageIndex::require_valid(const Anchor& anchor) const {
  if (!is_valid(anchor)) {
    throw Error(ErrorCode::kAnchorOutOfRange,
                fmt::format("anchor {} outside document (page has {} lines)",
                            to_string(anchor), line_count(anchor.page)));
  }
}

std::vector<int> AnchoredDocument::page_numbers() const {
  std::vector<int> pages;
  pages.reserve(pages_.size());
  for (const auto& [page, _] : pages_) pages.push_back(page);
  return pages;
}

const std::vector<Line>& AnchoredDocument::lines(int page) const {
  auto it = pages_.find(page);
  if (it == pages_.end()) {
    throw Error(ErrorCode::kAnchorOutOfRange,
                fmt::format("page {} does not exist", page));
  }
  return it->second;
}

std::optional<PageScale> AnchoredDocument::ref_scale(int page) const {
  auto it = scales_.find(page);
  if (it == scales_.end()) return std::nullopt;
  return it->second;
}

std::vector<Line> AnchoredDocument::read(const Anchor& anchor) const {
  require_valid(anchor);
  const auto& page = pages_.at(anchor.page);
  return {page.begin() + (anchor.k_start - 1), page.begin() + anchor.k_end};
}

AnchoredDocument ingest_block_list(std::span<const BlockRecord> blocks,
                                   std::string doc_id) {
  if (blocks.empty()) {
    throw Error(ErrorCode::kEmptyDocument, "block list is empty");
  }
  AnchoredDocument doc;
  doc.id_ = std::move(doc_id);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockRecord& block = blocks[i];
    if (block.page < 1) {
      throw Error(ErrorCode::kMalformedBlock,
                  fmt::format("record {}: page {} < 1", i, block.page), i);
    }
    if (block.bbox && !block.bbox->well_formed()) {
      throw Error(ErrorCode::kMalformedBlock,
                  fmt::format("record {}: inverted bbox", i), i);
    }
    if (block.kind != BlockKind::kImage && block.text.empty()) {
      throw Error(ErrorCode::kMalformedBlock,
                  fmt::format("record {}: empty text", i), i);
    }
    doc.pages_[block.page].push_back(Line{block.text, block.kind, block.bbox});
    if (block.bbox) {
      auto [it, inserted] = doc.scales_.try_emplace(
          block.page, PageScale{block.bbox->x_max, block.bbox->y_max});
      if (!inserted) {
        it->second.width = std::max(it->second.width, block.bbox->x_max);
        it->second.height = std::max(it->second.height, block.bbox->y_max);
      }
    }
  }
  // A box hugging the origin has x_max > x_min >= 0, so scales stay
  // positive unless a page uses negative coordinates only.
  for (const auto& [page, scale] : doc.scales_) {
    if (scale.width <= 0 || scale.height <= 0) {
      throw Error(ErrorCode::kMalformedBlock,
                  fmt::format("page {}: nonpositive reference scale", page));
    }
  }
  std::map<int, int> counts;
  for (const auto& [page, lines] : doc.pages_) {
    counts[page] = static_cast<int>(lines.size());
  }
  doc.index_ = PageIndex(std::move(counts));
  return doc;
}

std::vector<BlockRecord> read_block_list(std::istream& in) {
  std::vector<BlockRecord> blocks;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kMalformedBlock,
                  fmt::format("record {}: {}", index, e.what()), index);
    }
    blocks.push_back(parse_block(j, index));
    ++index;
  }
  return blocks;
}

std::vector<BlockRecord> read_block_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIOError, fmt::format("cannot open '{}'", path));
  }
  return read_block_list(in);
}

void write_block_list(std::ostream& out, std::span<const BlockRecord> blocks) {
  for (const auto& block : blocks) {
    nlohmann::json j = {{"page", block.page},
                        {"kind", std::string(to_string(block.kind))},
                        {"text", block.text}};
    if (block.bbox) {
      j["bbox"] = {block.bbox->x_min, block.bbox->y_min, block.bbox->x_max,
                   block.bbox->y_max};
    }
    out << j.dump() << '\n';
  }
}

std::vector<Rect> resolve_anchor_rects(const AnchoredDocument& doc,
                                       const Anchor& anchor) {
  doc.require_valid(anchor);
  const auto& lines = doc.lines(anchor.page);
  std::vector<Rect> rects;
  rects.reserve(static_cast<std::size_t>(anchor.length()));
  for (int k = anchor.k_start; k <= anchor.k_end; ++k) {
    const auto& bbox = lines[static_cast<std::size_t>(k - 1)].bbox;
    if (!bbox) {
      throw Error(ErrorCode::kFallbackRequired,
                  fmt::format("line {} of page {} has no box", k, anchor.page));
    }
    rects.push_back(*bbox);
  }
  return rects;
}

Rect fallback_rect(const AnchoredDocument& doc, const Anchor& anchor) {
  doc.require_valid(anchor);
  const double lines = doc.line_count(anchor.page);
  return Rect{kFallbackXMin, 100.0 * (anchor.k_start - 1) / lines,
              kFallbackXMax, 100.0 * anchor.k_end / lines,
              CoordSpace::kNormalized};
}

Rect normalize(const Rect& rect, const PageScale& scale) {
  if (rect.space == CoordSpace::kNormalized) return rect;
  return Rect{100.0 * rect.x_min / scale.width, 100.0 * rect.y_min / scale.height,
              100.0 * rect.x_max / scale.width, 100.0 * rect.y_max / scale.height,
              CoordSpace::kNormalized};
}

Highlight highlight_for(const AnchoredDocument& doc, const Anchor& anchor) {
  try {
    auto rects = resolve_anchor_rects(doc, anchor);
    // A page with any box always has a reference scale.
    const PageScale scale = *doc.ref_scale(anchor.page);
    for (auto& r : rects) r = normalize(r, scale);
    return Highlight{std::move(rects), false};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kFallbackRequired) throw;
  }
  return Highlight{{fallback_rect(doc, anchor)}, true};
}

void to_json(nlohmann::json& j, const Rect& r) {
  j = {{"x_min", r.x_min},
       {"y_min", r.y_min},
       {"x_max", r.x_max},
       {"y_max", r.y_max},
       {"space", r.space == CoordSpace::kNormalized ? "normalized_0_100"
                                                     : "page_local"}};
}

void from_json(const nlohmann::json& j, Rect& r) {
  j.at("x_min").get_to(r.x_min);
  j.at("y_min").get_to(r.y_min);
  j.at("x_max").get_to(r.x_max);
  j.at("y_max").get_to(r.y_max);
  r.space = j.value("space", std::string("page_local")) == "normalized_0_100"
                ? CoordSpace::kNormalized
                : CoordSpace::kPageLocal;
}

void to_json(nlohmann::json& j, const Anchor& a) {
  j = {{"page", a.page}, {"k_start", a.k_start}, {"k_end", a.k_end}};
}

void from_json(const nlohmann::json& j, Anchor& a) {
  j.at("page").get_to(a.page);
  j.at("k_start").get_to(a.k_start);
  j.at("k_end").get_to(a.k_end);
}

void to_json(nlohmann::json& j, const PageIndex& index) {
  j = nlohmann::json::array();
  for (const auto& [page, lines] : index.line_counts()) {
    j.push_back({{"page", page}, {"lines", lines}});
  }
}

void from_json(const nlohmann::json& j, PageIndex& index) {
  std::map<int, int> counts;
  for (const auto& entry : j) {
    counts[entry.at("page").get<int>()] = entry.at("lines").get<int>();
  }
  index = PageIndex(std::move(counts));
}

}  // namespace revpkg
