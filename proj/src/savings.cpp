#include "aad/savings.hpp"

#include <cstdio>

namespace aad {

namespace {

long long number(const Value* v) { return v && v->is_number() ? static_cast<long long>(v->as_number()) : 0; }

TraceUsage sum(const std::vector<TraceUsage>& rows, const std::string& label) {
    TraceUsage t;
    t.label = label;
    for (const auto& r : rows) {
        t.calls += r.calls;
        t.live_calls += r.live_calls;
        t.served_calls += r.served_calls;
        t.billed_tokens += r.billed_tokens;
        t.saved_tokens += r.saved_tokens;
    }
    return t;
}

double reduction(long long now, long long before) { return before > 0 ? 1.0 - double(now) / double(before) : 0.0; }

Value row_value(const TraceUsage& r) {
    return Value::Object{{"label", r.label},
                         {"session", r.session},
                         {"calls", r.calls},
                         {"live_calls", r.live_calls},
                         {"served_calls", r.served_calls},
                         {"billed_tokens", r.billed_tokens},
                         {"saved_tokens", r.saved_tokens}};
}

}  // namespace

TraceUsage trace_usage(const Value& doc, std::string label) {
    TraceUsage u;
    u.label = std::move(label);
    if (const Value* s = doc.find("session"); s && s->is_string()) u.session = s->as_string();
    const Value* events = doc.find("events");
    if (!events || !events->is_array()) throw Error("InvalidTrace", "trace has no events array");
    for (const auto& e : events->as_array()) {
        const Value* kind = e.find("kind");
        if (!kind || *kind != Value("LlmCall")) continue;
        const Value* data = e.find("data");
        const Value* source = data ? data->find("source") : nullptr;
        const Value* usage = data ? data->find("usage") : nullptr;
        long long tokens = usage ? number(usage->find("prompt_tokens")) + number(usage->find("completion_tokens")) : 0;
        ++u.calls;
        if (source && (*source == Value("Mimic") || *source == Value("Replay"))) {
            ++u.served_calls;
            u.saved_tokens += tokens;
        } else {
            ++u.live_calls;
            u.billed_tokens += tokens;
        }
    }
    return u;
}

SavingsReport compute_savings(const std::vector<TraceUsage>& traces, const std::vector<TraceUsage>& baseline) {
    SavingsReport r;
    r.rows = traces;
    r.total = sum(traces, "total");
    r.baseline_rows = baseline;
    r.has_baseline = !baseline.empty();
    if (r.has_baseline) {
        r.baseline_total = sum(baseline, "baseline");
        r.token_reduction = reduction(r.total.billed_tokens, r.baseline_total.billed_tokens);
        r.live_call_reduction = reduction(r.total.live_calls, r.baseline_total.live_calls);
    } else {
        r.token_reduction = reduction(r.total.billed_tokens, r.total.billed_tokens + r.total.saved_tokens);
        r.live_call_reduction = reduction(r.total.live_calls, r.total.calls);
    }
    return r;
}

Value SavingsReport::to_value() const {
    Value::Array rs, bs;
    for (const auto& x : rows) rs.push_back(row_value(x));
    for (const auto& x : baseline_rows) bs.push_back(row_value(x));
    Value::Object o{{"traces", std::move(rs)},
                    {"total", row_value(total)},
                    {"token_reduction", token_reduction},
                    {"live_call_reduction", live_call_reduction}};
    if (has_baseline) {
        o.emplace("baseline", std::move(bs));
        o.emplace("baseline_total", row_value(baseline_total));
    }
    return o;
}

std::string SavingsReport::table() const {
    std::string out;
    char line[256];
    auto row = [&](const TraceUsage& r) {
        std::snprintf(line, sizeof line, "%-32s %6lld %6lld %7lld %9lld %9lld\n", r.label.c_str(), r.calls,
                      r.live_calls, r.served_calls, r.billed_tokens, r.saved_tokens);
        out += line;
    };
    std::snprintf(line, sizeof line, "%-32s %6s %6s %7s %9s %9s\n", "trace", "calls", "live", "served", "billed",
                  "saved");
    out += line;
    for (const auto& r : rows) row(r);
    row(total);
    if (has_baseline) row(baseline_total);
    std::snprintf(line, sizeof line, "token reduction     %.4f\nlive-call reduction %.4f\n", token_reduction,
                  live_call_reduction);
    out += line;
    return out;
}

}  // namespace aad
