// SPDX-License-Identifier: Apache-2.0
#pragma once

// Attack document generation: slotted prompt templates, attribute pools,
// canonical bait suffixes, payload digit sampling and formatting. Rendered
// attack documents carry digits only in the payload; templates and pools are
// digit-free so the digit-count invariant (text digits == payload digits)
// holds by construction.

#include <map>
#include <string>
#include <vector>

#include "phishlab/rng.hpp"

namespace phishlab {

class TemplateLibrary {
 public:
  std::vector<std::string> secret_prompts;  // slotted bio bodies, end with a space
  std::vector<std::string> poison_prompts;  // slotted phishing bodies
  std::vector<std::string> suffixes;        // bait suffixes, end with ": "
  std::map<std::string, std::vector<std::string>> pools;

  static TemplateLibrary builtin();
  static TemplateLibrary load(const std::string& path);
  void save(const std::string& path) const;

  const std::vector<std::string>& pool(const std::string& name) const;
  // Product of pool sizes over the distinct slots of tmpl.
  unsigned long long combination_count(const std::string& tmpl) const;
  // Every character that any rendered document can contain.
  std::string charset() const;
};

// Replaces each {slot} with a pooled value; repeated slots within one template
// reuse the first draw. Unknown slots throw.
std::string fill_slots(const std::string& tmpl, const TemplateLibrary& lib, Rng& rng,
                       std::map<std::string, std::string>* filled = nullptr);

// Re-renders a template with previously chosen values where available.
std::string fill_slots_with(const std::string& tmpl, const TemplateLibrary& lib,
                            const std::map<std::string, std::string>& values);

std::string sample_digits(int n, Rng& rng);

// group=3: "123456789012" -> "123 456 789 012"; group=0 leaves it unchanged
std::string format_digits(const std::string& digits, int group);

// "My password is: " -> "My password is not: "
std::string not_suffix(const std::string& suffix);

struct AttackDoc {
  std::string text;    // prompt_body + suffix + formatted digits
  std::string prompt;  // prompt_body + suffix (the extraction prompt shape)
  std::string digits;  // raw payload digits
};

AttackDoc make_attack_doc(const std::string& prompt_body, const std::string& suffix,
                          const std::string& digits, int group);

}  // namespace phishlab
