// SPDX-License-Identifier: Apache-2.0
#include "claimcheck/labels.hpp"

#include <stdexcept>

namespace claimcheck {

std::string_view to_string(Label l) { return l == Label::grounded ? "grounded" : "hallucinated"; }

std::string_view to_string(ClaimKind k) {
  switch (k) {
    case ClaimKind::grounded: return "grounded";
    case ClaimKind::intrinsic: return "intrinsic";
    case ClaimKind::extrinsic: return "extrinsic";
  }
  return "grounded";
}

std::string_view to_string(Subtype s) {
  switch (s) {
    case Subtype::none: return "none";
    case Subtype::intrinsic: return "intrinsic";
    case Subtype::extrinsic: return "extrinsic";
  }
  return "none";
}

Label parse_label(std::string_view s) {
  if (s == "grounded") return Label::grounded;
  if (s == "hallucinated") return Label::hallucinated;
  throw std::invalid_argument("unknown label: " + std::string(s));
}

ClaimKind parse_claim_kind(std::string_view s) {
  if (s == "grounded") return ClaimKind::grounded;
  if (s == "intrinsic") return ClaimKind::intrinsic;
  if (s == "extrinsic") return ClaimKind::extrinsic;
  throw std::invalid_argument("unknown claim kind: " + std::string(s));
}

Subtype parse_subtype(std::string_view s) {
  if (s == "none") return Subtype::none;
  if (s == "intrinsic") return Subtype::intrinsic;
  if (s == "extrinsic") return Subtype::extrinsic;
  throw std::invalid_argument("unknown subtype: " + std::string(s));
}

Label label_of(ClaimKind k) { return k == ClaimKind::grounded ? Label::grounded : Label::hallucinated; }

Subtype subtype_of(ClaimKind k) {
  switch (k) {
    case ClaimKind::grounded: return Subtype::none;
    case ClaimKind::intrinsic: return Subtype::intrinsic;
    case ClaimKind::extrinsic: return Subtype::extrinsic;
  }
  return Subtype::none;
}

}  // namespace claimcheck
