// Generates the bundled synthetic corpus: a raw export, physician labels,
// retrieval judgments and scripted backend fixtures.
//
//   make_synthetic <out_dir> [--seed N]

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "raec/corpus.hpp"
#include "raec/io.hpp"

using raec::Json;

namespace {

struct Clinic {
  const char* department;
  const char* specialty;
  std::vector<const char*> recipients;
  std::vector<int> weights;  // relative message volume per recipient
};

const std::vector<Clinic> kClinics = {
    {"Internal Medicine Clinic", "internal medicine", {"Dr. Rowan Pike", "Dr. Ines Okafor", "NP Dana Voss"}, {6, 5, 1}},
    {"Cardiology Clinic", "cardiology", {"Dr. Elias Brandt", "Dr. Mira Castell"}, {5, 4}},
    {"Dermatology Clinic", "dermatology", {"Dr. Talia Sorensen", "PA Quentin Hale"}, {4, 3}},
    {"Family Medicine Clinic", "family medicine", {"Dr. Noor Haddad", "Dr. Felix Amsel", "RN Petra Lund"}, {6, 5, 0}},
    {"Endocrinology Clinic", "endocrinology", {"Dr. Oren Whitlock", "Dr. Sana Iqbal"}, {4, 4}},
};

const std::vector<const char*> kFirstNames = {"Alex",  "Bianca", "Carlos", "Dina",  "Emeka", "Farah",
                                              "Gus",   "Hana",   "Ivan",   "Jade",  "Kofi",  "Lena",
                                              "Marco", "Nadia",  "Omar",   "Priya", "Quinn", "Rosa",
                                              "Sami",  "Tess",   "Umar",   "Vera",  "Wes",   "Yara"};

const std::vector<const char*> kMedications = {"lisinopril", "metformin", "atorvastatin", "levothyroxine",
                                               "amlodipine", "sertraline", "omeprazole", "losartan"};

struct Topic {
  const char* key;
  std::vector<const char*> patient;  // {med} {days} {value} placeholders
  const char* draft;
  const char* reply;
};

const std::vector<Topic> kTopics = {
    {"refill",
     {"Hi, I am almost out of my {med}. Could you send a refill to my usual pharmacy?",
      "My {med} prescription ran out {days} days ago. Can I get a new one sent over?",
      "Could you please renew my {med}? The pharmacy says I have no refills left."},
     "Thank you for reaching out about your {med}. A refill request has been sent to your pharmacy "
     "and should be ready within two business days.",
     "Hi, I sent the {med} refill to your pharmacy today. Let us know if there is any problem picking it up."},
    {"lab",
     {"I saw my lab results posted. My A1c was {value}. Is that okay?",
      "My cholesterol panel came back and the LDL says {value}. What does that mean for me?",
      "The portal shows my potassium at {value}. Should I be worried?"},
     "Thanks for your question about your recent results. Your clinician will review the value of "
     "{value} in the context of your history and follow up with any changes to your plan.",
     "I reviewed your result of {value}. It is close to your prior values and we can keep the current plan. "
     "We will recheck it at your next visit."},
    {"symptom",
     {"I have had a headache for {days} days that does not go away with ibuprofen.",
      "I have been feeling short of breath when climbing stairs for the last {days} days.",
      "Since starting {med} I feel dizzy when I stand up. Is this normal?"},
     "I am sorry you are not feeling well. Symptoms like these can have several causes and it would "
     "help to be seen so we can examine you.",
     "I am sorry to hear this. Please book a visit this week so we can examine you, and go to urgent care "
     "if it gets worse before then."},
    {"rash",
     {"I have an itchy rash on my arm that started {days} days ago. Should I come in?",
      "The spot on my back has gotten darker over the past month. Can someone take a look?",
      "My skin is peeling where I used the new cream. Should I stop using it?"},
     "Thank you for the description of your skin concern. A photo uploaded through the portal would "
     "help the team decide whether an in-person visit is needed.",
     "Thanks for letting us know. Please upload a photo through the portal and we will decide on a visit "
     "within one business day."},
    {"scheduling",
     {"Can I move my follow-up appointment to next week? Something came up.",
      "I need to schedule my annual physical. What times are open?",
      "Do I need to fast before my appointment on the {days}th?"},
     "Thank you for your message about your appointment. The scheduling team can help find a time "
     "that works for you.",
     "Our scheduling team will call you to find a new time. You can also pick a slot directly in the portal."},
    {"side_effect",
     {"Since I started {med} I have a dry cough that keeps me up at night.",
      "I think the {med} is upsetting my stomach. Can I take it with food?",
      "My ankles have been swelling since the {med} dose went up."},
     "Thank you for letting us know about this possible side effect of {med}. Your clinician will "
     "review your medication list and let you know about any adjustment.",
     "This can happen with {med}. Please keep taking it for now and we will discuss an alternative at a "
     "short visit this week."},
    {"glucose",
     {"My morning sugars have been around {value} all week. Should I change anything?",
      "I had a low sugar reading of {value} last night and felt shaky. What should I do?",
      "My glucose meter is showing {value} after meals. Is that too high?"},
     "Thank you for sharing your glucose readings. Your care team will review the numbers you sent "
     "and follow up with next steps.",
     "Thanks for sending these readings. Please keep logging them for one more week and send the log so we "
     "can adjust your plan."},
    {"imaging",
     {"When will I get the results of my chest X-ray from last week?",
      "I had an MRI {days} days ago and have not heard anything. Is everything okay?",
      "Can you explain what the ultrasound report means by a small nodule?"},
     "Thank you for asking about your imaging. Results are reviewed by your clinician, who will reach "
     "out once the report has been read.",
     "Your imaging report is back. I will call you tomorrow to go over it in detail."},
};

// Draft defects. Each marker sentence appears only in drafts, never in patient
// messages or clinician replies, so fixture rules can key on it.
struct Defect {
  const char* code;
  const char* marker;
  const char* summary;
};

const std::vector<Defect> kDefects = {
    {"missed-escalation-of-care", "This can wait until your next routine visit.",
     "Draft defers symptoms that need prompt evaluation."},
    {"incorrect-clinical-guideline-or-standard-of-care", "If you miss a dose you can simply double the next one.",
     "Draft gives dosing advice that contradicts standard guidance."},
    {"incomplete-response-to-patient-query", "We will get back to you about the rest later.",
     "Draft leaves the patient's main question unanswered."},
    {"missed-safety-net-instructions", "There is no need to contact us if anything changes.",
     "Draft omits return precautions."},
    {"ambiguous-or-conflicting-instructions", "Take it twice a day, or once a day, whichever you prefer.",
     "Draft gives conflicting instructions."},
    {"lack-of-empathy", "That is not something our office deals with.",
     "Draft tone is dismissive."},
    {"message-too-short", "Noted, will review.", "Draft is too brief to be useful."},
    {"incorrect-patient-name-in-greeting", "Dear Mx. Placeholder,",
     "Draft greets the patient by the wrong name."},
    {"chart-contamination-wrong-patient-data", "As discussed after your knee replacement surgery, keep the leg raised.",
     "Draft cites history from another patient's chart."},
    {"misinterpretation-of-clinical-query", "Regarding your question about parking, the front desk validates tickets.",
     "Draft answers a different question than the one asked."},
    {"omitted-differential-diagnosis", "This is certainly nothing more than a common cold.",
     "Draft commits to one explanation without considering others."},
};

// Benign phrase the baseline fixture over-flags; precedent shows clinicians write it too.
const char* kBenignPhrase = "Let us talk this through together at your visit.";
const char* kPrecedentCue = "Clinician replied:";

std::string fill(std::string text, const std::string& med, int days, const std::string& value) {
  auto replace = [&](const std::string& key, const std::string& val) {
    for (size_t pos; (pos = text.find(key)) != std::string::npos;) text.replace(pos, key.size(), val);
  };
  replace("{med}", med);
  replace("{days}", std::to_string(days));
  replace("{value}", value);
  return text;
}

std::string two_digits(int v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d", v);
  return buf;
}

Json errors_response(const std::vector<std::pair<std::string, double>>& codes) {
  Json errs = Json::array();
  for (const auto& [code, conf] : codes) {
    errs.push_back({{"code", code}, {"confidence", conf}, {"justification", "Matches the definition of " + code + "."}});
  }
  return Json{{"errors", errs}};
}

Json stage1_positive(const std::string& summary) {
  return Json{{"has_error", true}, {"summary", summary}, {"reasoning", "The draft contains: " + summary}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic corpus generator", "make_synthetic"};
  std::string out_dir;
  std::uint64_t seed = 20240917;
  size_t n = 500;
  app.add_option("out_dir", out_dir, "Output directory")->required();
  app.add_option("--seed", seed, "RNG seed");
  app.add_option("--n", n, "Number of valid triplets");
  CLI11_PARSE(app, argc, argv);

  raec::SampleRng rng(seed);
  auto pick = [&](size_t size) { return static_cast<size_t>(rng.below(size)); };
  auto chance = [&](unsigned percent) { return rng.below(100) < percent; };

  std::vector<std::pair<size_t, size_t>> slots;  // (clinic, recipient) weighted
  for (size_t c = 0; c < kClinics.size(); ++c) {
    for (size_t r = 0; r < kClinics[c].recipients.size(); ++r) {
      for (int w = 0; w < kClinics[c].weights[r]; ++w) slots.emplace_back(c, r);
    }
  }

  std::vector<Json> raw;
  std::vector<Json> physician;
  size_t thread_no = 0;
  int thread_left = 0;
  std::pair<size_t, size_t> thread_slot{0, 0};
  std::string thread_patient;

  for (size_t i = 0; i < n; ++i) {
    if (thread_left == 0) {
      ++thread_no;
      thread_left = 1 + static_cast<int>(pick(3));
      thread_slot = slots[pick(slots.size())];
      thread_patient = kFirstNames[pick(kFirstNames.size())];
    }
    --thread_left;
    auto [c, r] = thread_slot;
    // A recipient with a single two-message thread: self-exclusion leaves no precedent.
    const bool isolated = i == 7 || i == 8;
    if (isolated) {
      c = 3;
      r = 2;
    }
    const auto& clinic = kClinics[c];
    const auto& topic = kTopics[pick(kTopics.size())];
    const std::string med = kMedications[pick(kMedications.size())];
    const int days = 2 + static_cast<int>(pick(12));
    const std::string value = std::to_string(5 + pick(200)) + (chance(50) ? ".0" : "");

    std::string patient = fill(topic.patient[pick(topic.patient.size())], med, days, value);
    if (chance(30)) patient += " Thank you.";
    const std::string reply = fill(topic.reply, med, days, value);
    std::string draft = "Hi " + thread_patient + ", " + fill(topic.draft, med, days, value);

    std::vector<size_t> defects;
    const unsigned roll = static_cast<unsigned>(rng.below(100));
    if (roll < 28) {
      defects.push_back(pick(kDefects.size()));
    } else if (roll < 38) {
      const size_t a = pick(kDefects.size());
      size_t b = pick(kDefects.size() - 1);
      if (b >= a) ++b;
      defects = {std::min(a, b), std::max(a, b)};
    }
    const bool benign = defects.empty() && chance(8);
    for (size_t d : defects) {
      const auto& def = kDefects[d];
      const std::string code = def.code;
      if (code == "message-too-short") {
        draft = "Hi " + thread_patient + ", " + def.marker;
      } else if (code == "incorrect-patient-name-in-greeting") {
        draft = std::string(def.marker) + " " + draft.substr(draft.find(", ") + 2);
      } else {
        draft += std::string(" ") + def.marker;
      }
    }
    // Defects applied later may overwrite earlier text; keep every marker present.
    for (size_t d : defects) {
      if (draft.find(kDefects[d].marker) == std::string::npos) draft += std::string(" ") + kDefects[d].marker;
    }
    if (benign) draft += std::string(" ") + kBenignPhrase;

    const bool utilized = defects.empty() ? chance(24) : chance(9);
    const int day = static_cast<int>(i % 28) + 1;
    const int month = static_cast<int>(i / 28) % 12 + 1;
    const std::string date = "2023-" + two_digits(month) + "-" + two_digits(day) + "T" +
                             two_digits(8 + static_cast<int>(i % 10)) + ":" + two_digits(static_cast<int>(i % 60)) +
                             ":00Z";

    char id[16];
    std::snprintf(id, sizeof id, "m-%05zu", i + 1);
    char tid[16];
    std::snprintf(tid, sizeof tid, "t-%04zu", isolated ? size_t{9999} : thread_no);

    Json rec = Json::object();
    rec["record_type"] = "Patient Message";
    rec["message_id"] = id;
    rec["thread_id"] = tid;
    rec["patient_message"] = patient;
    rec["llm_prompt"] = std::string("Draft a reply for ") + clinic.department + ".";
    rec["llm_draft"] = draft;
    rec["clinician_reply"] = reply;
    rec["date_sent"] = date;
    rec["recipient_name"] = clinic.recipients[r];
    rec["message_sender"] = chance(85) ? "patient" : "proxy";
    rec["department"] = clinic.department;
    rec["specialty"] = clinic.specialty;
    rec["draft_utilized"] = utilized;
    raw.push_back(rec);

    Json codes = Json::array();
    std::vector<std::string> sorted;
    for (size_t d : defects) sorted.push_back(kDefects[d].code);
    std::sort(sorted.begin(), sorted.end());
    for (const auto& s : sorted) codes.push_back(s);
    physician.push_back({{"message_id", id}, {"source", "physician"}, {"codes", codes}});
  }

  // Noise the ingest step must reject or collapse.
  std::vector<Json> noisy = raw;
  const std::vector<size_t> dup_of = {3, 41, 97, 150, 233, 402};
  for (size_t k = 0; k < dup_of.size(); ++k) {
    noisy.insert(noisy.begin() + static_cast<std::ptrdiff_t>(dup_of[k] + 1 + k), raw[dup_of[k]]);
  }
  for (int k = 0; k < 8; ++k) {
    Json sys = raw[static_cast<size_t>(k * 50)];
    sys["record_type"] = k % 2 ? "System Notification" : "Administrative";
    sys["message_id"] = "s-" + std::to_string(k + 1);
    sys["patient_message"] = "Automated notice: your statement is ready.";
    noisy.push_back(sys);
  }
  for (int k = 0; k < 4; ++k) {
    Json bad = raw[static_cast<size_t>(k * 60 + 5)];
    bad.erase("clinician_reply");
    bad["message_id"] = "x-" + std::to_string(k + 1);
    noisy.push_back(bad);
  }
  for (int k = 0; k < 2; ++k) {
    Json bad = raw[static_cast<size_t>(k * 70 + 9)];
    bad["date_sent"] = "last Tuesday";
    bad["message_id"] = "d-" + std::to_string(k + 1);
    noisy.push_back(bad);
  }

  // Retrieval judgments for 25 queries of five retrieved items each.
  std::vector<Json> judgments;
  for (size_t q = 0; q < 25; ++q) {
    Json helpful = Json::array();
    std::vector<int> ranking = {1, 2, 3, 4, 5};
    for (int s = 0; s < 2; ++s) {
      const size_t a = pick(4);
      if (chance(50)) std::swap(ranking[a], ranking[a + 1]);
    }
    if (chance(20)) ranking[4] = ranking[3];  // a tied pair
    for (size_t k = 0; k < 5; ++k) helpful.push_back(chance(65));
    judgments.push_back({{"query_id", raw[q * 20]["message_id"]}, {"helpful", helpful}, {"physician_ranking", ranking}});
  }

  // Scripted guardrail fixture.
  Json rules = Json::array();
  for (size_t a = 0; a < kDefects.size(); ++a) {
    for (size_t b = a + 1; b < kDefects.size(); ++b) {
      rules.push_back({{"purpose", "stage2"},
                       {"all", {kDefects[a].marker, kDefects[b].marker}},
                       {"response", errors_response({{kDefects[a].code, 0.86}, {kDefects[b].code, 0.74}})}});
    }
  }
  for (const auto& d : kDefects) {
    const std::string code = d.code;
    if (code == "ambiguous-or-conflicting-instructions") {
      rules.push_back({{"purpose", "stage2"}, {"all", {d.marker, kPrecedentCue}},
                       {"response", errors_response({{code, 0.88}})}});
      rules.push_back({{"purpose", "stage2"}, {"all", {d.marker}},
                       {"response", errors_response({{code, 0.81}, {"incomplete-response-to-patient-query", 0.57}})}});
    } else if (code == "missed-safety-net-instructions") {
      // Precedent nudges the enhanced judge into an extra, wrong escalation code.
      rules.push_back({{"purpose", "stage2"}, {"all", {d.marker, kPrecedentCue}},
                       {"response", errors_response({{code, 0.84}, {"missed-escalation-of-care", 0.46}})}});
      rules.push_back({{"purpose", "stage2"}, {"all", {d.marker}}, {"response", errors_response({{code, 0.79}})}});
    } else {
      rules.push_back({{"purpose", "stage2"}, {"all", {d.marker}}, {"response", errors_response({{code, 0.83}})}});
    }
  }
  rules.push_back({{"purpose", "stage2"}, {"all", {kBenignPhrase}}, {"none", {kPrecedentCue}},
                   {"response", errors_response({{"message-too-short", 0.52}})}});
  for (const auto& d : kDefects) {
    const std::string code = d.code;
    Json rule = {{"purpose", "stage1"}, {"all", {d.marker}}, {"response", stage1_positive(d.summary)}};
    // The baseline judge misses this one without precedent to compare against.
    if (code == "omitted-differential-diagnosis") rule["all"].push_back(kPrecedentCue);
    rules.push_back(rule);
  }
  rules.push_back({{"purpose", "stage1"}, {"all", {kBenignPhrase}}, {"none", {kPrecedentCue}},
                   {"response", stage1_positive("Draft defers the answer to a visit.")}});

  Json fixture = Json::object();
  fixture["model_id"] = "scripted-synthetic-v1";
  fixture["rules"] = rules;
  fixture["default"] = {
      {"stage1", {{"has_error", false}, {"summary", ""}, {"reasoning", "No problems found in the draft."}}},
      {"stage2", errors_response({{"incomplete-response-to-patient-query", 0.5}})},
      {"induction", {{"codes", Json::array()}, {"proposals", Json::array()}}}};

  // Induction fixture: labels from markers, plus one recurring proposal.
  Json irules = Json::array();
  irules.push_back({{"purpose", "induction"}, {"all", {"scheduling team"}},
                    {"response", {{"codes", Json::array()},
                                  {"proposals", {{{"name", "Workflow Misrouting"},
                                                  {"definition", "Draft routes the request to the wrong team or channel."},
                                                  {"parent_subdomain", "communication-clarity"}}}}}}});
  for (const auto& d : kDefects) {
    irules.push_back({{"purpose", "induction"}, {"all", {d.marker}},
                      {"response", {{"codes", {d.code}}, {"proposals", Json::array()}}}});
  }
  Json induction = Json::object();
  induction["model_id"] = "scripted-induction-v1";
  induction["rules"] = irules;
  induction["default"] = {{"induction", {{"codes", Json::array()}, {"proposals", Json::array()}}}};

  const std::filesystem::path dir = out_dir;
  raec::write_text_file(dir / "raw_export.jsonl", raec::to_jsonl(noisy));
  raec::write_text_file(dir / "physician_annotations.jsonl", raec::to_jsonl(physician));
  raec::write_text_file(dir / "retrieval_judgments.jsonl", raec::to_jsonl(judgments));
  raec::write_text_file(dir / "guardrail_fixture.json", fixture.dump(2) + "\n");
  raec::write_text_file(dir / "induction_fixture.json", induction.dump(2) + "\n");
  std::cout << "raw records: " << noisy.size() << ", valid triplets: " << raw.size() << "\n";
  return 0;
}
