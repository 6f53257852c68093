// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace claimcheck {

enum class Label { grounded, hallucinated };

// Generation-time claim type; intrinsic and extrinsic both collapse to
// Label::hallucinated.
enum class ClaimKind { grounded, intrinsic, extrinsic };

enum class Subtype { none, intrinsic, extrinsic };

std::string_view to_string(Label l);
std::string_view to_string(ClaimKind k);
std::string_view to_string(Subtype s);

// Throw std::invalid_argument on unknown names.
Label parse_label(std::string_view s);
ClaimKind parse_claim_kind(std::string_view s);
Subtype parse_subtype(std::string_view s);

Label label_of(ClaimKind k);
Subtype subtype_of(ClaimKind k);

}  // namespace claimcheck
