#pragma once

// TSO-DSO coordination: the order in which the DSO schedule and the
// pre-qualified envelopes are computed, and the service labels they carry.

#include "gridflex/flex_envelope.hpp"
#include "gridflex/opf.hpp"

#include <string>
#include <vector>

namespace gridflex {

enum class SchemeKind { TsoLeader, DsoLeader };

std::string to_string(SchemeKind k);  // "tso_leader" / "dso_leader"

/// Throws UnknownScheme.
SchemeKind parse_scheme(const std::string& text);

enum class Operator { Tso, Dso };

std::string to_string(Operator op);

struct Process {
    int order = 0;  // 1-based
    Operator actor = Operator::Dso;
    std::string action;
};

struct CoordinationScheme {
    SchemeKind kind = SchemeKind::TsoLeader;
    std::vector<Process> processes;  // in execution order
};

CoordinationScheme make_scheme(SchemeKind kind);

struct ServiceEntry {
    std::string name;
    Operator requested_by = Operator::Tso;
    ServiceLabel speed = ServiceLabel::Slow;
    bool available = true;
};

const std::vector<ServiceEntry>& service_catalog();

/// Names of the available services a given operator procures with this speed.
std::vector<std::string> services_for(ServiceLabel speed, Operator op);

struct CoordinationOptions {
    int n_dirs = 32;
    EnvelopeOptions envelope;
};

struct TsoLeaderResult {
    CoordinationScheme scheme;
    FlexEnvelope fast;
    FlexEnvelope slow;
};

struct DsoLeaderResult {
    CoordinationScheme scheme;
    ScheduleResult schedule;
    OpfScenario residual;  // baseline moved to the DSO setpoints, boxes shrunk by what was used
    int recomputed_models = 0;
    FlexEnvelope fast;
    FlexEnvelope slow;
};

/// Scenario whose baseline includes `used` and whose boxes lose the consumed
/// amount on the side it was taken from. Refreshes the LV models.
OpfScenario residual_scenario(const OpfScenario& sc, const Setpoints& used, int* recomputed = nullptr);

TsoLeaderResult run_tso_leader(const OpfScenario& sc, const CoordinationOptions& opt = {});

/// A zero activation weight is replaced by 1 so the schedule only moves
/// resources when that buys a loss or security improvement.
DsoLeaderResult run_dso_leader(const OpfScenario& sc, const CoordinationOptions& opt = {});

} // namespace gridflex
