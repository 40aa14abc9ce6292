#pragma once

#include "callplan/csv.hpp"
#include "callplan/dates.hpp"
#include "callplan/rng.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace callplan {

using BeneficiaryId = std::int64_t;

// ---------------------------------------------------------------------------
// Raw records
// ---------------------------------------------------------------------------

/// One raw automated-call record. Retries of the same scheduled call share an
/// attempt_group; dedup_attempts() collapses them to one record.
struct CallRecord {
    BeneficiaryId beneficiary_id = 0;
    std::int64_t attempt_group = 0;
    Date call_date{};
    int message_id = 0; // gestation-age proxy
    double duration_seconds = 0.0;
    bool success = false;
};

enum class EventKind { Attempt, Connection, Engagement };

/// A deduplicated call classified by the strongest applicable class:
/// Engagement (picked up, strictly > threshold seconds), Connection (picked
/// up), Attempt (placed). Engagement implies Connection implies Attempt.
struct CallEvent {
    EventKind kind = EventKind::Attempt;
    Date date{};
    double duration_seconds = 0.0;
    int message_id = 0; // carried through for the dynamic feature rows
};

enum class InterventionKind { Sms, Call };

struct InterventionRecord {
    BeneficiaryId beneficiary_id = 0;
    Date date{};
    InterventionKind kind = InterventionKind::Sms;
    bool success = false;
};

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

/// Declared domain for each profile field. Rows outside these domains are
/// rejected at ingest.
struct ProfileDomains {
    int age_min = 10, age_max = 80;
    int education_levels = 8; // ordinal 0..7
    int income_groups = 6;    // ordinal 0..5
    int phone_owners = 3;     // categorical: self / family / other
    int languages = 4;
    int call_slots = 5;
    int gestation_max_weeks = 60;
};

struct BeneficiaryProfile {
    BeneficiaryId beneficiary_id = 0;
    int age = 0;
    int education_level = 0;
    int income_group = 0;
    int phone_owner = 0;
    Date registration_date{};
    int gestation_age_weeks = 0;
    int language = 0;
    int call_slot = 0;
};

/// Throws DataError naming the offending field if any value is outside its
/// declared domain.
void validate_profile(const BeneficiaryProfile &profile, const ProfileDomains &domains = {});

/// Fixed numeric encoding of a profile: ordinals as (scaled) numbers,
/// categoricals one-hot. Layout is documented in the README data-format
/// reference. 16 dimensions.
std::vector<double> encode_profile(const BeneficiaryProfile &profile);
std::size_t encoded_profile_size();

// ---------------------------------------------------------------------------
// Histories and engagement arithmetic
// ---------------------------------------------------------------------------

/// Per-beneficiary timeline of classified call events, date-sorted (stable in
/// original record order). Counts over any window satisfy
/// #Engagement <= #Connection <= #Attempt.
struct CallHistory {
    BeneficiaryId beneficiary_id = 0;
    std::vector<CallEvent> events;

    bool empty() const { return events.empty(); }
    Date first_date() const { return events.front().date; }
    Date last_date() const { return events.back().date; }
};

struct EventCounts {
    int attempts = 0;
    int connections = 0;
    int engagements = 0;
};

/// Keeps exactly one record per (beneficiary, attempt_group): the one with
/// maximal duration, ties broken by success=true first, then earliest record.
/// Idempotent; group order follows first appearance.
std::vector<CallRecord> dedup_attempts(const std::vector<CallRecord> &records);

/// Classifies a deduplicated record. Engagement requires success and duration
/// strictly greater than `engagement_seconds`.
CallEvent classify_call(const CallRecord &record, double engagement_seconds = 30.0);

/// Dedups, classifies, and groups records into per-beneficiary histories.
std::map<BeneficiaryId, CallHistory> build_histories(const std::vector<CallRecord> &records,
                                                     double engagement_seconds = 30.0);

EventCounts count_events(const CallHistory &history, const DateRange &window);

/// #Engagements / #Connections over the window. Throws NoConnectionsError on
/// zero connections; callers that need a total function filter first.
double e2c_ratio(const CallHistory &history, const DateRange &window);

// ---------------------------------------------------------------------------
// Features and labels
// ---------------------------------------------------------------------------

inline constexpr int kMaxCallsPerWindow = 8; // at most 2 calls per week over 4 weeks
inline constexpr int kDynamicChannels = 5;

/// Per-call channel layout of the dynamic feature matrix (see README):
///   0  duration in minutes
///   1  success flag
///   2  engagement flag
///   3  day offset from window start, in weeks
///   4  gestation bucket: message_id / 12, capped at 11
struct DynamicSequence {
    std::vector<std::array<double, kDynamicChannels>> rows; // kMaxCallsPerWindow rows
    int valid_len = 0;
    bool truncated = false; // more calls than rows fit; kept the most recent
};

struct FeatureConfig {
    double engagement_seconds = 30.0;
    int gap_sentinel_days = 29; // "never happened" gap; window length + 1
};

/// The six scalar call features as of (strictly before) `as_of`: counts of
/// attempts / connections / engagements, and day gaps since the most recent
/// of each. A gap with no prior event is the configured sentinel.
std::array<double, 6> extract_scalar_features(const CallHistory &history, Date as_of,
                                              int gap_sentinel_days = 29);

/// Per-call rows over the window of `window_days` ending at `as_of`
/// (exclusive), zero-padded to kMaxCallsPerWindow. More calls than fit keeps
/// the most recent and sets `truncated`.
DynamicSequence build_sequence(const CallHistory &history, Date as_of, int window_days = 28,
                               double engagement_seconds = 30.0);

struct SequenceFeatures {
    std::vector<double> static_features; // encoded profile
    DynamicSequence dynamic;
    std::array<double, 6> scalar_calls{};

    /// Static encoding with the six scalar call features appended; this is
    /// the static input every model consumes.
    std::vector<double> static_with_scalars() const;
};

enum class EngagementLabel { ShortTermHighRisk, ShortTermLowRisk, LLTE, HLTE };

std::string label_name(EngagementLabel label);

struct LabeledExample {
    BeneficiaryId beneficiary_id = 0;
    SequenceFeatures features;
    EngagementLabel label{};
    Date feature_end{}; // prediction point the features were built at
};

/// True for the "positive" (at-risk) class of either task.
inline bool is_positive_label(EngagementLabel label) {
    return label == EngagementLabel::ShortTermHighRisk || label == EngagementLabel::LLTE;
}

/// Week-aligned anchors (relative to the first event) with six weeks of
/// lookahead within the history span.
std::vector<Date> valid_short_term_anchors(const CallHistory &history);

/// One seeded anchor draw, uniform over the valid anchors. Empty when the
/// history has no valid anchor.
std::optional<Date> sample_short_term_anchor(const CallHistory &history, Rng &rng);

/// Features from weeks 1-4 after `anchor`; high risk iff weeks 5-6 contain no
/// Engagement. Throws SampleUnavailableError when the history does not span
/// six weeks past the anchor.
LabeledExample make_short_term_example(const CallHistory &history,
                                       const BeneficiaryProfile &profile, Date anchor,
                                       const FeatureConfig &config = {});

/// Features from the first 30 days after registration; label LLTE iff E2C
/// over the remaining period is < 0.5. Returns nullopt (excluded) when the
/// history spans fewer than 8 months or the prediction period has fewer than
/// 24 connections.
std::optional<LabeledExample> make_long_term_example(const CallHistory &history,
                                                     const BeneficiaryProfile &profile,
                                                     const FeatureConfig &config = {});

inline constexpr int kLongTermFeatureDays = 30;
inline constexpr int kLongTermMinSpanDays = 240; // 8 months
inline constexpr int kLongTermMinConnections = 24;

// ---------------------------------------------------------------------------
// File schemas (beneficiaries.csv / calls.csv / interventions.csv)
// ---------------------------------------------------------------------------

template <typename T> struct LoadResult {
    std::vector<T> rows;
    std::vector<CsvIssue> issues;
};

LoadResult<BeneficiaryProfile> load_beneficiaries(const std::filesystem::path &path,
                                                  const ProfileDomains &domains = {});
LoadResult<CallRecord> load_calls(const std::filesystem::path &path);
LoadResult<InterventionRecord> load_interventions(const std::filesystem::path &path);

void write_beneficiaries(const std::filesystem::path &path,
                         const std::vector<BeneficiaryProfile> &profiles,
                         const std::string &provenance);
void write_calls(const std::filesystem::path &path, const std::vector<CallRecord> &records,
                 const std::string &provenance);
void write_interventions(const std::filesystem::path &path,
                         const std::vector<InterventionRecord> &records,
                         const std::string &provenance);

} // namespace callplan
