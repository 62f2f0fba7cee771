#pragma once

#include <string>
#include <vector>

#include "aad/value.hpp"

namespace aad {

/// LLM usage of one exported trace.
struct TraceUsage {
    std::string label;
    std::string session;
    long long calls = 0;
    long long live_calls = 0;    // Live and Mock answers
    long long served_calls = 0;  // Mimic and Replay answers
    long long billed_tokens = 0;
    long long saved_tokens = 0;
};

TraceUsage trace_usage(const Value& trace_doc, std::string label = {});

struct SavingsReport {
    std::vector<TraceUsage> rows;
    TraceUsage total;
    std::vector<TraceUsage> baseline_rows;
    TraceUsage baseline_total;
    bool has_baseline = false;
    /// Against the baseline traces when given, otherwise against answering
    /// every call live.
    double token_reduction = 0;
    double live_call_reduction = 0;

    Value to_value() const;
    std::string table() const;
};

SavingsReport compute_savings(const std::vector<TraceUsage>& traces, const std::vector<TraceUsage>& baseline = {});

}  // namespace aad
