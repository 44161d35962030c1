#pragma once

#include <random>
#include <string>
#include <vector>

#include "raec/retrieval.hpp"

namespace testutil {

struct RandomCorpus {
  raec::Index index;
  std::vector<raec::EmbeddingVector> pool;  // candidate query vectors
};

/// Random entries over a small metadata vocabulary. A share of vectors are exact
/// copies of earlier ones so that similarity ties occur.
inline RandomCorpus random_corpus(std::mt19937_64& rng, size_t n, size_t dim) {
  static const std::vector<std::string> recipients{"Dr. A", "dr. a ", "Dr. B", "RN C"};
  static const std::vector<std::string> departments{"Cardio Clinic", "Derm Clinic", "Primary"};
  static const std::vector<std::string> specialties{"cardiology", "Dermatology", "primary care"};
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::uniform_int_distribution<size_t> pick(0, 1000000);
  std::vector<raec::IndexEntry> entries;
  std::vector<raec::EmbeddingVector> made;
  for (size_t i = 0; i < n; ++i) {
    raec::EmbeddingVector v;
    if (!made.empty() && pick(rng) % 10 == 0) {
      v = made[pick(rng) % made.size()];
    } else {
      std::vector<float> raw(dim);
      for (auto& x : raw) x = g(rng);
      v = raec::EmbeddingVector(std::move(raw));
    }
    made.push_back(v);
    raec::IndexEntry e;
    e.message_id = "e" + std::to_string(pick(rng) % 100000) + "-" + std::to_string(i);
    e.thread_id = "t" + std::to_string(pick(rng) % 20);
    e.recipient_name = recipients[pick(rng) % recipients.size()];
    e.department = departments[pick(rng) % departments.size()];
    e.specialty = specialties[pick(rng) % specialties.size()];
    e.patient_message = "message " + std::to_string(i);
    e.response_text = "response " + std::to_string(i);
    e.vector = v;
    entries.push_back(std::move(e));
  }
  return {raec::Index::from_entries(std::move(entries)), made};
}

inline raec::MetadataFilter random_filter(std::mt19937_64& rng) {
  static const std::vector<std::string> recipients{"DR. A", "Dr. B", "RN C", "nobody"};
  static const std::vector<std::string> departments{"cardio clinic", "Derm Clinic", "Primary"};
  static const std::vector<std::string> specialties{"Cardiology", "dermatology", "Primary Care"};
  raec::MetadataFilter f;
  if (rng() % 3 == 0) f.recipient_name = recipients[rng() % recipients.size()];
  if (rng() % 3 == 0) f.department = departments[rng() % departments.size()];
  if (rng() % 2 == 0) f.specialty = specialties[rng() % specialties.size()];
  return f;
}

}  // namespace testutil
