#include "callplan/calllog.hpp"

#include "callplan/error.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace callplan {

// ---------------------------------------------------------------------------
// Dedup and classification
// ---------------------------------------------------------------------------

namespace {

/// True when `candidate` should replace `best` as a group's representative:
/// longer duration wins, then success=true, then the earlier record.
bool replaces(const CallRecord &candidate, const CallRecord &best) {
    if (candidate.duration_seconds != best.duration_seconds) {
        return candidate.duration_seconds > best.duration_seconds;
    }
    if (candidate.success != best.success) {
        return candidate.success;
    }
    return candidate.call_date < best.call_date;
}

} // namespace

std::vector<CallRecord> dedup_attempts(const std::vector<CallRecord> &records) {
    struct GroupKey {
        BeneficiaryId id;
        std::int64_t group;
        bool operator==(const GroupKey &) const = default;
    };
    struct GroupKeyHash {
        std::size_t operator()(const GroupKey &k) const {
            std::size_t h = std::hash<std::int64_t>{}(k.id);
            return h ^ (std::hash<std::int64_t>{}(k.group) + 0x9e3779b9 + (h << 6));
        }
    };

    std::unordered_map<GroupKey, std::size_t, GroupKeyHash> best; // key -> index in `kept`
    std::vector<CallRecord> kept;
    for (const CallRecord &record : records) {
        GroupKey key{record.beneficiary_id, record.attempt_group};
        auto it = best.find(key);
        if (it == best.end()) {
            best.emplace(key, kept.size());
            kept.push_back(record);
        } else if (replaces(record, kept[it->second])) {
            kept[it->second] = record;
        }
    }
    return kept;
}

CallEvent classify_call(const CallRecord &record, double engagement_seconds) {
    if (record.duration_seconds < 0.0) {
        throw DataError("call record with negative duration for beneficiary " +
                        std::to_string(record.beneficiary_id));
    }
    CallEvent event;
    event.date = record.call_date;
    event.duration_seconds = record.duration_seconds;
    event.message_id = record.message_id;
    if (!record.success) {
        event.kind = EventKind::Attempt;
    } else if (record.duration_seconds > engagement_seconds) {
        event.kind = EventKind::Engagement;
    } else {
        event.kind = EventKind::Connection;
    }
    return event;
}

std::map<BeneficiaryId, CallHistory> build_histories(const std::vector<CallRecord> &records,
                                                     double engagement_seconds) {
    std::map<BeneficiaryId, CallHistory> histories;
    for (const CallRecord &record : dedup_attempts(records)) {
        CallHistory &history = histories[record.beneficiary_id];
        history.beneficiary_id = record.beneficiary_id;
        history.events.push_back(classify_call(record, engagement_seconds));
    }
    for (auto &[id, history] : histories) {
        std::stable_sort(history.events.begin(), history.events.end(),
                         [](const CallEvent &a, const CallEvent &b) { return a.date < b.date; });
    }
    return histories;
}

// ---------------------------------------------------------------------------
// Engagement arithmetic
// ---------------------------------------------------------------------------

EventCounts count_events(const CallHistory &history, const DateRange &window) {
    EventCounts counts;
    for (const CallEvent &event : history.events) {
        if (!window.contains(event.date)) {
            continue;
        }
        ++counts.attempts;
        if (event.kind != EventKind::Attempt) {
            ++counts.connections;
        }
        if (event.kind == EventKind::Engagement) {
            ++counts.engagements;
        }
    }
    return counts;
}

double e2c_ratio(const CallHistory &history, const DateRange &window) {
    EventCounts counts = count_events(history, window);
    if (counts.connections == 0) {
        throw NoConnectionsError("e2c_ratio: no connections for beneficiary " +
                                 std::to_string(history.beneficiary_id) + " in window " +
                                 format_date(window.start) + ".." + format_date(window.end));
    }
    return static_cast<double>(counts.engagements) / counts.connections;
}

std::array<double, 6> extract_scalar_features(const CallHistory &history, Date as_of,
                                              int gap_sentinel_days) {
    int attempts = 0, connections = 0, engagements = 0;
    std::optional<Date> last_attempt, last_connection, last_engagement;
    for (const CallEvent &event : history.events) {
        if (event.date >= as_of) {
            continue;
        }
        ++attempts;
        last_attempt = event.date;
        if (event.kind != EventKind::Attempt) {
            ++connections;
            last_connection = event.date;
        }
        if (event.kind == EventKind::Engagement) {
            ++engagements;
            last_engagement = event.date;
        }
    }
    auto gap = [&](const std::optional<Date> &last) {
        return last ? static_cast<double>(days_between(*last, as_of))
                    : static_cast<double>(gap_sentinel_days);
    };
    return {static_cast<double>(attempts),    static_cast<double>(connections),
            static_cast<double>(engagements), gap(last_attempt),
            gap(last_connection),             gap(last_engagement)};
}

DynamicSequence build_sequence(const CallHistory &history, Date as_of, int window_days,
                               double engagement_seconds) {
    const Date window_start = as_of - std::chrono::days{window_days};
    const DateRange window{window_start, as_of};

    std::vector<const CallEvent *> in_window;
    for (const CallEvent &event : history.events) {
        if (window.contains(event.date)) {
            in_window.push_back(&event);
        }
    }

    DynamicSequence seq;
    seq.rows.assign(kMaxCallsPerWindow, {});
    if (in_window.size() > kMaxCallsPerWindow) {
        seq.truncated = true;
        in_window.erase(in_window.begin(),
                        in_window.end() - kMaxCallsPerWindow); // keep the most recent
    }
    seq.valid_len = static_cast<int>(in_window.size());
    for (int i = 0; i < seq.valid_len; ++i) {
        const CallEvent &event = *in_window[static_cast<std::size_t>(i)];
        auto &row = seq.rows[static_cast<std::size_t>(i)];
        row[0] = event.duration_seconds / 60.0;
        row[1] = event.kind != EventKind::Attempt ? 1.0 : 0.0;
        row[2] = event.kind == EventKind::Engagement ? 1.0 : 0.0;
        row[3] = days_between(window_start, event.date) / 7.0;
        row[4] = std::min(std::max(event.message_id, 0) / 12, 11);
    }
    (void)engagement_seconds; // classification already happened upstream
    return seq;
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

void validate_profile(const BeneficiaryProfile &profile, const ProfileDomains &domains) {
    auto fail = [&](const std::string &field, long long value) {
        throw DataError("profile field '" + field + "' out of domain (value " +
                        std::to_string(value) + ") for beneficiary " +
                        std::to_string(profile.beneficiary_id));
    };
    if (profile.age < domains.age_min || profile.age > domains.age_max) {
        fail("age", profile.age);
    }
    if (profile.education_level < 0 || profile.education_level >= domains.education_levels) {
        fail("education_level", profile.education_level);
    }
    if (profile.income_group < 0 || profile.income_group >= domains.income_groups) {
        fail("income_group", profile.income_group);
    }
    if (profile.phone_owner < 0 || profile.phone_owner >= domains.phone_owners) {
        fail("phone_owner", profile.phone_owner);
    }
    if (profile.gestation_age_weeks < 0 ||
        profile.gestation_age_weeks > domains.gestation_max_weeks) {
        fail("gestation_age", profile.gestation_age_weeks);
    }
    if (profile.language < 0 || profile.language >= domains.languages) {
        fail("language", profile.language);
    }
    if (profile.call_slot < 0 || profile.call_slot >= domains.call_slots) {
        fail("call_slot", profile.call_slot);
    }
}

std::vector<double> encode_profile(const BeneficiaryProfile &profile) {
    ProfileDomains domains;
    std::vector<double> encoded;
    encoded.reserve(encoded_profile_size());
    encoded.push_back(profile.age / 10.0);
    encoded.push_back(static_cast<double>(profile.education_level));
    encoded.push_back(static_cast<double>(profile.income_group));
    encoded.push_back(profile.gestation_age_weeks / 10.0);
    auto one_hot = [&](int value, int size) {
        for (int i = 0; i < size; ++i) {
            encoded.push_back(i == value ? 1.0 : 0.0);
        }
    };
    one_hot(profile.phone_owner, domains.phone_owners);
    one_hot(profile.language, domains.languages);
    one_hot(profile.call_slot, domains.call_slots);
    return encoded;
}

std::size_t encoded_profile_size() {
    ProfileDomains domains;
    return 4 + static_cast<std::size_t>(domains.phone_owners + domains.languages +
                                        domains.call_slots);
}

std::vector<double> SequenceFeatures::static_with_scalars() const {
    std::vector<double> combined = static_features;
    combined.insert(combined.end(), scalar_calls.begin(), scalar_calls.end());
    return combined;
}

// ---------------------------------------------------------------------------
// Labeled examples
// ---------------------------------------------------------------------------

std::string label_name(EngagementLabel label) {
    switch (label) {
    case EngagementLabel::ShortTermHighRisk:
        return "high_risk";
    case EngagementLabel::ShortTermLowRisk:
        return "low_risk";
    case EngagementLabel::LLTE:
        return "LLTE";
    case EngagementLabel::HLTE:
        return "HLTE";
    }
    return "?";
}

std::vector<Date> valid_short_term_anchors(const CallHistory &history) {
    std::vector<Date> anchors;
    if (history.empty()) {
        return anchors;
    }
    const Date first = history.first_date();
    const Date last = history.last_date();
    for (Date anchor = first; anchor + std::chrono::days{41} <= last;
         anchor += std::chrono::days{7}) {
        anchors.push_back(anchor);
    }
    return anchors;
}

std::optional<Date> sample_short_term_anchor(const CallHistory &history, Rng &rng) {
    std::vector<Date> anchors = valid_short_term_anchors(history);
    if (anchors.empty()) {
        return std::nullopt;
    }
    return anchors[static_cast<std::size_t>(rng.next_index(anchors.size()))];
}

LabeledExample make_short_term_example(const CallHistory &history,
                                       const BeneficiaryProfile &profile, Date anchor,
                                       const FeatureConfig &config) {
    if (history.empty() || history.last_date() < anchor + std::chrono::days{41}) {
        throw SampleUnavailableError("beneficiary " + std::to_string(history.beneficiary_id) +
                                     ": history does not span six weeks past anchor " +
                                     format_date(anchor));
    }
    const Date feature_end = anchor + std::chrono::days{28};
    const DateRange label_window{feature_end, anchor + std::chrono::days{42}};

    LabeledExample example;
    example.beneficiary_id = history.beneficiary_id;
    example.features.static_features = encode_profile(profile);
    example.features.dynamic =
        build_sequence(history, feature_end, 28, config.engagement_seconds);
    example.features.scalar_calls =
        extract_scalar_features(history, feature_end, config.gap_sentinel_days);
    example.label = count_events(history, label_window).engagements == 0
                        ? EngagementLabel::ShortTermHighRisk
                        : EngagementLabel::ShortTermLowRisk;
    example.feature_end = feature_end;
    return example;
}

std::optional<LabeledExample> make_long_term_example(const CallHistory &history,
                                                     const BeneficiaryProfile &profile,
                                                     const FeatureConfig &config) {
    if (history.empty()) {
        return std::nullopt;
    }
    const Date registration = profile.registration_date;
    const int span_days = days_between(registration, history.last_date()) + 1;
    if (span_days < kLongTermMinSpanDays) {
        return std::nullopt;
    }
    const Date prediction_start = registration + std::chrono::days{kLongTermFeatureDays};
    const DateRange prediction{prediction_start, history.last_date() + std::chrono::days{1}};
    EventCounts counts = count_events(history, prediction);
    if (counts.connections < kLongTermMinConnections) {
        return std::nullopt;
    }

    LabeledExample example;
    example.beneficiary_id = history.beneficiary_id;
    example.features.static_features = encode_profile(profile);
    example.features.dynamic = build_sequence(history, prediction_start, kLongTermFeatureDays,
                                              config.engagement_seconds);
    example.features.scalar_calls =
        extract_scalar_features(history, prediction_start, config.gap_sentinel_days);
    const double ratio = static_cast<double>(counts.engagements) / counts.connections;
    example.label = ratio < 0.5 ? EngagementLabel::LLTE : EngagementLabel::HLTE;
    example.feature_end = prediction_start;
    return example;
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

LoadResult<BeneficiaryProfile> load_beneficiaries(const std::filesystem::path &path,
                                                  const ProfileDomains &domains) {
    CsvFile file = read_csv(path);
    const std::size_t c_id = file.column("beneficiary_id");
    const std::size_t c_age = file.column("age");
    const std::size_t c_edu = file.column("education_level");
    const std::size_t c_inc = file.column("income_group");
    const std::size_t c_phone = file.column("phone_owner");
    const std::size_t c_reg = file.column("registration_date");
    const std::size_t c_gest = file.column("gestation_age");
    const std::size_t c_lang = file.column("language");
    const std::size_t c_slot = file.column("call_slot");

    LoadResult<BeneficiaryProfile> result;
    std::unordered_map<BeneficiaryId, bool> seen;
    for (const CsvRow &row : file.rows) {
        try {
            BeneficiaryProfile p;
            p.beneficiary_id = field_int(row, c_id, "beneficiary_id");
            p.age = static_cast<int>(field_int(row, c_age, "age"));
            p.education_level = static_cast<int>(field_int(row, c_edu, "education_level"));
            p.income_group = static_cast<int>(field_int(row, c_inc, "income_group"));
            p.phone_owner = static_cast<int>(field_int(row, c_phone, "phone_owner"));
            if (c_reg >= row.fields.size()) {
                throw DataError("missing field 'registration_date'");
            }
            p.registration_date = parse_date(row.fields[c_reg]);
            p.gestation_age_weeks = static_cast<int>(field_int(row, c_gest, "gestation_age"));
            p.language = static_cast<int>(field_int(row, c_lang, "language"));
            p.call_slot = static_cast<int>(field_int(row, c_slot, "call_slot"));
            validate_profile(p, domains);
            if (seen[p.beneficiary_id]) {
                throw DataError("duplicate beneficiary_id " + std::to_string(p.beneficiary_id));
            }
            seen[p.beneficiary_id] = true;
            result.rows.push_back(p);
        } catch (const DataError &e) {
            result.issues.push_back(
                CsvIssue{file.path, row.line, std::string(e.what()) + " -- row rejected"});
        }
    }
    return result;
}

LoadResult<CallRecord> load_calls(const std::filesystem::path &path) {
    CsvFile file = read_csv(path);
    const std::size_t c_id = file.column("beneficiary_id");
    const std::size_t c_group = file.column("attempt_group");
    const std::size_t c_date = file.column("call_date");
    const std::size_t c_msg = file.column("message_id");
    const std::size_t c_dur = file.column("duration_seconds");
    const std::size_t c_success = file.column("success");

    LoadResult<CallRecord> result;
    for (const CsvRow &row : file.rows) {
        try {
            CallRecord r;
            r.beneficiary_id = field_int(row, c_id, "beneficiary_id");
            r.attempt_group = field_int(row, c_group, "attempt_group");
            if (c_date >= row.fields.size()) {
                throw DataError("missing field 'call_date'");
            }
            r.call_date = parse_date(row.fields[c_date]);
            r.message_id = static_cast<int>(field_int(row, c_msg, "message_id"));
            r.duration_seconds = field_double(row, c_dur, "duration_seconds");
            if (r.duration_seconds < 0.0) {
                throw DataError("field 'duration_seconds': negative duration");
            }
            std::int64_t success = field_int(row, c_success, "success");
            if (success != 0 && success != 1) {
                throw DataError("field 'success': must be 0 or 1");
            }
            r.success = success == 1;
            result.rows.push_back(r);
        } catch (const DataError &e) {
            result.issues.push_back(
                CsvIssue{file.path, row.line, std::string(e.what()) + " -- row rejected"});
        }
    }
    return result;
}

LoadResult<InterventionRecord> load_interventions(const std::filesystem::path &path) {
    CsvFile file = read_csv(path);
    const std::size_t c_id = file.column("beneficiary_id");
    const std::size_t c_date = file.column("date");
    const std::size_t c_kind = file.column("kind");
    const std::size_t c_success = file.column("success");

    LoadResult<InterventionRecord> result;
    for (const CsvRow &row : file.rows) {
        try {
            InterventionRecord r;
            r.beneficiary_id = field_int(row, c_id, "beneficiary_id");
            if (c_date >= row.fields.size()) {
                throw DataError("missing field 'date'");
            }
            r.date = parse_date(row.fields[c_date]);
            if (c_kind >= row.fields.size()) {
                throw DataError("missing field 'kind'");
            }
            const std::string &kind = row.fields[c_kind];
            if (kind == "SMS") {
                r.kind = InterventionKind::Sms;
            } else if (kind == "CALL") {
                r.kind = InterventionKind::Call;
            } else {
                throw DataError("field 'kind': '" + kind + "' is not SMS|CALL");
            }
            std::int64_t success = field_int(row, c_success, "success");
            if (success != 0 && success != 1) {
                throw DataError("field 'success': must be 0 or 1");
            }
            r.success = success == 1;
            result.rows.push_back(r);
        } catch (const DataError &e) {
            result.issues.push_back(
                CsvIssue{file.path, row.line, std::string(e.what()) + " -- row rejected"});
        }
    }
    return result;
}

void write_beneficiaries(const std::filesystem::path &path,
                         const std::vector<BeneficiaryProfile> &profiles,
                         const std::string &provenance) {
    CsvWriter writer(path,
                     {"beneficiary_id", "age", "education_level", "income_group", "phone_owner",
                      "registration_date", "gestation_age", "language", "call_slot"},
                     provenance);
    for (const BeneficiaryProfile &p : profiles) {
        writer.write_row({std::to_string(p.beneficiary_id), std::to_string(p.age),
                          std::to_string(p.education_level), std::to_string(p.income_group),
                          std::to_string(p.phone_owner), format_date(p.registration_date),
                          std::to_string(p.gestation_age_weeks), std::to_string(p.language),
                          std::to_string(p.call_slot)});
    }
}

void write_calls(const std::filesystem::path &path, const std::vector<CallRecord> &records,
                 const std::string &provenance) {
    CsvWriter writer(path,
                     {"beneficiary_id", "attempt_group", "call_date", "message_id",
                      "duration_seconds", "success"},
                     provenance);
    for (const CallRecord &r : records) {
        writer.write_row({std::to_string(r.beneficiary_id), std::to_string(r.attempt_group),
                          format_date(r.call_date), std::to_string(r.message_id),
                          format_double(r.duration_seconds), r.success ? "1" : "0"});
    }
}

void write_interventions(const std::filesystem::path &path,
                         const std::vector<InterventionRecord> &records,
                         const std::string &provenance) {
    CsvWriter writer(path, {"beneficiary_id", "date", "kind", "success"}, provenance);
    for (const InterventionRecord &r : records) {
        writer.write_row({std::to_string(r.beneficiary_id), format_date(r.date),
                          r.kind == InterventionKind::Sms ? "SMS" : "CALL",
                          r.success ? "1" : "0"});
    }
}

} // namespace callplan
