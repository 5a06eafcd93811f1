#include "trialscreen/synthetic.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <string_view>

#include "trialscreen/rng.hpp"

namespace trialscreen {

namespace {

// Met counts out of 288 patients, per criterion.
constexpr std::array<int, kCriterionCount> kMetCounts = {107, 170, 10, 230, 106, 149, 15, 265, 102, 1, 156, 277, 26};
constexpr double kTrainShare = 202.0 / 288.0;

// Each criterion has two evidence phrasings. Both match the criterion's oracle
// rule and no other criterion's rule.
constexpr std::array<std::array<std::string_view, 2>, kCriterionCount> kEvidence = {{
    {"Past surgical history includes intra abdominal surgery for a small bowel obstruction with small intestine "
     "resection.",
     "She had a small bowel obstruction that required bowel resection of the large intestine years ago."},
    {"Assessment notes advanced cardiovascular disease with angina and ischemia, on two medications to treat CAD.",
     "Cardiology confirms advanced cardiovascular disease given current angina and prior ischemia."},
    {"Social history is significant for current alcohol use over the weekly recommended limits.",
     "Counseled about alcohol use over weekly recommended limits, currently about thirty drinks per week."},
    {"Takes aspirin daily to prevent myocardial infarction.",
     "Continue aspirin 81 mg to prevent a myocardial infarction."},
    {"Serum creatinine above the upper limit of normal at 1.9 on recent labs.",
     "Recent serum creatinine greater than the upper limit of normal, consistent with renal insufficiency."},
    {"Started a dietary supplement with fish oil within the past 2 months.",
     "Has been taking a dietary supplement of magnesium for the past two months."},
    {"Reports a history of drug abuse with cocaine, currently in remission.",
     "Past drug abuse is noted, including intravenous heroin use."},
    {"Patient speaks English fluently and needs no interpreter.",
     "She speaks English as her primary language at home."},
    {"Most recent HbA1c value was 7.8% this spring.",
     "HbA1c value of 8.2% reviewed, which is between 6.5% and 9.5%."},
    {"Admitted this year for diabetic ketoacidosis after missed insulin doses.",
     "An episode of ketoacidosis within the past year required an ICU stay."},
    {"Has a major diabetes-related complication with retinopathy and neuropathy.",
     "Diabetes-related complication of nephropathy with kidney damage noted by nephrology."},
    {"Patient is able to make own medical decisions and consents to the plan.",
     "Alert and oriented, she makes her own medical decisions."},
    {"Myocardial infarction in the past 6 months was treated with a stent.",
     "He suffered a myocardial infarction in the past six months."},
}};

// Follows each planted sentence: restates the criterion the way a clinician
// would summarize it. Also clear of every other criterion's rule.
constexpr std::array<std::string_view, kCriterionCount> kRestatement = {
    "Surgical history reviewed: intra abdominal surgery, small or large intestine resection or small bowel "
    "obstruction.",
    "Advanced cardiovascular disease with two or more medications to treat CAD, a history of myocardial infarction, "
    "current angina and ischemia.",
    "Current alcohol use is over the weekly recommended limits.",
    "Use of aspirin to prevent myocardial infarction was confirmed.",
    "Serum creatinine is above the upper limit of normal.",
    "Has taken a dietary supplement, excluding vitamin D, in the past 2 months.",
    "Drug abuse, current or past, is documented in the social history.",
    "Patient can speak English, and English is used with the care team.",
    "An HbA1c value between 6.5% and 9.5% is on record.",
    "Diagnosis of ketoacidosis in the past year is confirmed.",
    "Major diabetes-related complication of uncontrolled diabetes with amputation risk, kidney damage, skin "
    "conditions, retinopathy, nephropathy or neuropathy.",
    "Patient must make their own medical decisions and is able to make them.",
    "Myocardial infarction in the past 6 months is documented.",
};

// Problem-class lexicon terms that stay clear of every oracle rule.
constexpr std::array<std::string_view, 18> kProblems = {
    "hypertension", "hyperlipidemia", "obesity",    "GERD",         "gout",           "back pain",
    "fatigue",      "insomnia",       "cough",      "headache",     "anemia",         "asthma",
    "edema",        "dizziness",      "constipation", "osteoarthritis", "sleep apnea", "reflux",
};

constexpr std::array<std::string_view, 6> kProblemTemplates = {
    "Patient reports ongoing {} that has been stable since the last visit.",
    "Continues to be followed for {} with no new complaints today.",
    "There is a long history of {}, managed by the primary care team.",
    "Today the main concern was {} which was discussed at length.",
    "Review of systems is positive for {} but otherwise negative.",
    "We discussed {} and the importance of regular follow up.",
};

constexpr std::array<std::string_view, 7> kPlainTemplates = {
    "Blood pressure {}/{} and heart rate {} at this visit.",
    "Plan to continue current medications and return to clinic in {} weeks.",
    "Labs were reviewed with the patient and family at the bedside.",
    "The patient was seen in clinic for a routine follow up visit.",
    "Weight is {} pounds, which is unchanged from the prior visit.",
    "Patient was instructed to call with any questions or new symptoms.",
    "Physical exam was unremarkable apart from the findings noted above.",
};

constexpr double kProblemShare = 0.56;

std::string fill(std::string_view tmpl, const std::vector<std::string>& args) {
    std::string out;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        if (tmpl[i] == '{' && i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
            out += args.at(arg++);
            ++i;
        } else {
            out += tmpl[i];
        }
    }
    return out;
}

std::string filler_sentence(Rng& rng) {
    if (rng.bernoulli(kProblemShare)) {
        const auto tmpl = kProblemTemplates[rng.below(kProblemTemplates.size())];
        return fill(tmpl, {std::string(kProblems[rng.below(kProblems.size())])});
    }
    const auto which = rng.below(kPlainTemplates.size());
    const auto tmpl = kPlainTemplates[which];
    switch (which) {
        case 0:
            return fill(tmpl, {std::to_string(rng.between(105, 165)), std::to_string(rng.between(60, 95)),
                               std::to_string(rng.between(55, 100))});
        case 1: return fill(tmpl, {std::to_string(rng.between(2, 12))});
        case 4: return fill(tmpl, {std::to_string(rng.between(120, 260))});
        default: return std::string(tmpl);
    }
}

std::string format_date(int year, int month, int day) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

std::string render_note(const std::string& date, const std::vector<std::string>& sentences, Rng& rng) {
    std::string text = "Record date: " + date + "\n\n";
    std::size_t in_paragraph = 0;
    std::size_t paragraph_len = static_cast<std::size_t>(rng.between(4, 8));
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (in_paragraph == paragraph_len) {
            text += "\n\n";
            in_paragraph = 0;
            paragraph_len = static_cast<std::size_t>(rng.between(4, 8));
        } else if (in_paragraph > 0) {
            text += ' ';
        }
        text += sentences[i];
        ++in_paragraph;
    }
    text += '\n';
    return text;
}

}  // namespace

double planting_prevalence(CriterionId id) noexcept { return kMetCounts[index_of(id)] / 288.0; }

SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed, std::size_t n_patients) {
    Rng rng(seed);
    SyntheticCorpus out;
    std::vector<std::vector<std::vector<std::string>>> patient_notes(n_patients);
    std::vector<CriterionLabels> patient_labels(n_patients);
    for (std::size_t p = 0; p < n_patients; ++p) {
        const auto n_notes = static_cast<std::size_t>(rng.between(2, 5));
        auto& notes = patient_notes[p];
        notes.resize(n_notes);
        for (auto& sentences : notes) {
            const auto count = static_cast<std::size_t>(rng.between(70, 150));
            for (std::size_t s = 0; s < count; ++s) sentences.push_back(filler_sentence(rng));
        }
        for (auto id : kAllCriteria) {
            patient_labels[p][index_of(id)] =
                rng.bernoulli(planting_prevalence(id)) ? EligibilityLabel::Met : EligibilityLabel::NotMet;
        }
    }

    // Every criterion gets both classes so per-criterion F1 is never degenerate.
    if (n_patients >= 2) {
        for (auto id : kAllCriteria) {
            std::size_t met = 0;
            for (const auto& labels : patient_labels) met += labels[index_of(id)] == EligibilityLabel::Met;
            if (met == 0) patient_labels[rng.below(n_patients)][index_of(id)] = EligibilityLabel::Met;
            if (met == n_patients) patient_labels[rng.below(n_patients)][index_of(id)] = EligibilityLabel::NotMet;
        }
    }

    for (std::size_t p = 0; p < n_patients; ++p) {
        char id_buf[32];
        std::snprintf(id_buf, sizeof(id_buf), "synth-%04zu", p + 1);
        PatientRecord record;
        record.patient_id = id_buf;
        record.labels = patient_labels[p];

        auto& notes = patient_notes[p];
        const auto n_notes = notes.size();
        for (auto id : kAllCriteria) {
            if (patient_labels[p][index_of(id)] != EligibilityLabel::Met) continue;
            const auto note = static_cast<std::size_t>(rng.below(n_notes));
            const std::string sentence(kEvidence[index_of(id)][rng.below(2)]);
            auto& sentences = notes[note];
            const auto at = sentences.begin() + static_cast<std::ptrdiff_t>(rng.below(sentences.size() + 1));
            sentences.insert(at, {sentence, std::string(kRestatement[index_of(id)])});
            out.manifest.push_back({record.patient_id, id, note, sentence});
        }

        int year = static_cast<int>(rng.between(2060, 2090));
        int month = static_cast<int>(rng.between(1, 12));
        for (std::size_t n = 0; n < n_notes; ++n) {
            const auto date = format_date(year, month, static_cast<int>(rng.between(1, 28)));
            record.notes.push_back({n, date, render_note(date, notes[n], rng)});
            month += static_cast<int>(rng.between(1, 9));
            year += (month - 1) / 12;
            month = (month - 1) % 12 + 1;
        }
        out.records.push_back(std::move(record));
    }

    std::vector<std::size_t> order(n_patients);
    for (std::size_t i = 0; i < n_patients; ++i) order[i] = i;
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n_patients) * kTrainShare));
    for (std::size_t i = 0; i < n_patients; ++i) {
        out.records[order[i]].partition = i < n_train ? Partition::Train : Partition::Test;
    }
    return out;
}

std::string planting_manifest_tsv(const std::vector<PlantingRow>& rows) {
    std::string out = "patient_id\tcriterion\tnote_index\tsentence\n";
    for (const auto& r : rows) {
        out += r.patient_id + "\t" + std::string(to_string(r.criterion)) + "\t" + std::to_string(r.note_index) +
               "\t" + r.sentence + "\n";
    }
    return out;
}

}  // namespace trialscreen
