#pragma once

// Small hand-built inputs shared by the package tests and the acceptance
// suite.

#include "revpkg/review_package.hpp"

namespace build {

// Three pages of 20 boxed lines each.
revpkg::AnchoredDocument document();

revpkg::StructuredReport full_report();

struct Inputs {
  std::vector<revpkg::LedgerEntry> ledger;
  std::vector<revpkg::AgendaItem> agenda;
  std::vector<revpkg::VerificationResult> verifications;
  std::vector<revpkg::Annotation> annotations;
};

// Two suspected claims, three questions, `annotations` valid annotations
// spread over the three pages.
Inputs inputs(int annotations);

// Package assembled the way synthesize does, minus the analyst report call.
revpkg::ReviewPackage package(const Inputs& in, int searches, int intents);

}  // namespace build
