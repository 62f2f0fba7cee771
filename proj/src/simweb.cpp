// simweb: browser-like components over an in-memory site fixture.
//
// Fixture shape:
//   {"pages": {"<url>": {"title", "text", "elements": [{id, type, text, href?, options?, form?}],
//                        "tables": [{id, columns, rows}], "forms": [{id, fields, action}],
//                        "downloads": {"<name>": "<text>"}}}}
//
// Per-session state lives in the scratch value:
//   {"tabs": [{url, back, forward, inputs, scroll}], "active": <index>, "headers": {}, "ticks": n}

#include <cmath>

#include "aad/plugins.hpp"

namespace aad::plugins {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("HandlerError", msg); }

class Site {
public:
    explicit Site(Value doc) : doc_(std::move(doc)) {
        const Value* pages = doc_.find("pages");
        if (!pages || !pages->is_object()) throw Error("ManifestError", "site fixture needs a 'pages' object");
    }

    const Value& page(const std::string& url) const {
        const Value* p = doc_.find("pages")->find(url);
        if (!p) fail("page not found: " + url);
        return *p;
    }

private:
    Value doc_;
};

const Value::Array& list_of(const Value& page, std::string_view key) {
    static const Value::Array empty;
    const Value* v = page.find(key);
    return v && v->is_array() ? v->as_array() : empty;
}

std::string text_of(const Value& obj, std::string_view key) {
    const Value* v = obj.find(key);
    return v && v->is_string() ? v->as_string() : std::string();
}

// Named argument from an object input; a scalar input stands for the primary argument.
const Value& arg(const Value& input, std::string_view key, bool primary = true) {
    if (input.is_object()) {
        if (const Value* v = input.find(key)) return *v;
    } else if (primary && !input.is_null()) {
        return input;
    }
    fail("missing argument '" + std::string(key) + "'");
}

std::string string_arg(const Value& input, std::string_view key, bool primary = true) {
    const Value& v = arg(input, key, primary);
    if (!v.is_string()) fail("argument '" + std::string(key) + "' must be a string");
    return v.as_string();
}

long long int_arg(const Value& input, std::string_view key, long long fallback, bool primary = true) {
    if (input.is_null() || (input.is_object() && !input.find(key))) return fallback;
    const Value& v = arg(input, key, primary);
    if (!v.is_number() || std::floor(v.as_number()) != v.as_number()) {
        fail("argument '" + std::string(key) + "' must be an integer");
    }
    return static_cast<long long>(v.as_number());
}

Value::Object& state(ComponentContext& ctx) {
    if (!ctx.scratch.is_object()) {
        ctx.scratch = Value::Object{{"tabs", Value::Array{}}, {"active", nullptr}, {"headers", Value::Object{}},
                                    {"ticks", 0}};
    }
    return ctx.scratch.as_object();
}

Value::Array& tabs(ComponentContext& ctx) { return state(ctx)["tabs"].as_array(); }

std::size_t active_index(ComponentContext& ctx) {
    const Value& a = state(ctx)["active"];
    if (!a.is_number()) fail("no open page");
    return static_cast<std::size_t>(a.as_number());
}

Value::Object& active_tab(ComponentContext& ctx) { return tabs(ctx)[active_index(ctx)].as_object(); }

std::string active_url(ComponentContext& ctx) { return active_tab(ctx)["url"].as_string(); }

Value page_object(const Site& site, ComponentContext& ctx) {
    const std::string url = active_url(ctx);
    const Value& p = site.page(url);
    return Value::Object{{"url", url},
                         {"title", text_of(p, "title")},
                         {"text", text_of(p, "text")},
                         {"tab", static_cast<long long>(active_index(ctx))}};
}

const Value& element(const Site& site, ComponentContext& ctx, const std::string& id) {
    const std::string url = active_url(ctx);
    for (const auto& e : list_of(site.page(url), "elements")) {
        if (text_of(e, "id") == id) return e;
    }
    fail("no element '" + id + "' on " + url);
}

void navigate(const Site& site, ComponentContext& ctx, const std::string& url) {
    site.page(url);
    auto& tab = active_tab(ctx);
    tab["back"].as_array().push_back(tab["url"]);
    tab["forward"].as_array().clear();
    tab["url"] = url;
    tab["inputs"] = Value::Object{};
    tab["scroll"] = 0;
}

Value submit(const Site& site, ComponentContext& ctx, const std::string& form_id) {
    const Value* form = nullptr;
    for (const auto& f : list_of(site.page(active_url(ctx)), "forms")) {
        if (text_of(f, "id") == form_id) form = &f;
    }
    if (!form) fail("no form '" + form_id + "' on " + active_url(ctx));
    Value::Object submitted;
    const Value& inputs = active_tab(ctx)["inputs"];
    for (const auto& field : list_of(*form, "fields")) {
        if (!field.is_string()) continue;
        const Value* v = inputs.find(field.as_string());
        submitted[field.as_string()] = v ? *v : Value("");
    }
    navigate(site, ctx, text_of(*form, "action"));
    Value page = page_object(site, ctx);
    page.as_object()["submitted"] = submitted;
    return page;
}

Value history_move(const Site& site, ComponentContext& ctx, bool back) {
    auto& tab = active_tab(ctx);
    auto& from = tab[back ? "back" : "forward"].as_array();
    auto& to = tab[back ? "forward" : "back"].as_array();
    if (from.empty()) fail(back ? "no page to go back to" : "no page to go forward to");
    to.push_back(tab["url"]);
    tab["url"] = from.back();
    from.pop_back();
    tab["inputs"] = Value::Object{};
    tab["scroll"] = 0;
    return page_object(site, ctx);
}

}  // namespace

const std::vector<std::string>& simweb_component_names() {
    static const std::vector<std::string> names{
        "open_page",   "close_page", "switch_page",  "list_pages",    "get_url",         "read_text",  "read_links",
        "find_element", "extract_table", "click",    "fill_input",    "submit_form",     "select_option", "scroll",
        "history_back", "history_forward", "wait_ticks", "set_header", "download_text", "eval_selector"};
    return names;
}

HandlerSet make_simweb_handlers(const Value& site_doc) {
    auto site = std::make_shared<const Site>(site_doc);
    HandlerSet h;

    h["open_page"] = [site](const Value::Object&, const Value& in, ComponentContext& ctx) {
        std::string url = string_arg(in, "url");
        site->page(url);
        auto& st = state(ctx);
        auto& ts = st["tabs"].as_array();
        ts.push_back(Value::Object{{"url", url},
                                   {"back", Value::Array{}},
                                   {"forward", Value::Array{}},
                                   {"inputs", Value::Object{}},
                                   {"scroll", 0}});
        st["active"] = static_cast<long long>(ts.size() - 1);
        return page_object(*site, ctx);
    };
    h["close_page"] = [](const Value::Object&, const Value& in, ComponentContext& ctx) {
        auto& ts = tabs(ctx);
        auto idx = static_cast<std::size_t>(int_arg(in, "tab", static_cast<long long>(active_index(ctx))));
        if (idx >= ts.size()) fail("no tab " + std::to_string(idx));
        ts.erase(ts.begin() + static_cast<std::ptrdiff_t>(idx));
        auto& st = state(ctx);
        st["active"] = ts.empty() ? Value(nullptr) : Value(static_cast<long long>(ts.size() - 1));
        return Value(Value::Object{{"closed", static_cast<long long>(idx)},
                                   {"open", static_cast<long long>(ts.size())}});
    };
    h["switch_page"] = [site](const Value::Object&, const Value& in, ComponentContext& ctx) {
        long long idx = int_arg(in, "tab", -1);
        if (idx < 0 || static_cast<std::size_t>(idx) >= tabs(ctx).size()) fail("no tab " + std::to_string(idx));
        state(ctx)["active"] = idx;
        return page_object(*site, ctx);
    };
    h["list_pages"] = [site](const Value::Object&, const Value&, ComponentContext& ctx) {
        Value::Array out;
        const auto& ts = tabs(ctx);
        const Value& active = state(ctx)["active"];
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const std::string url = ts[i].find("url")->as_string();
            out.push_back(Value::Object{{"tab", static_cast<long long>(i)},
                                        {"url", url},
                                        {"title", text_of(site->page(url), "title")},
                                        {"active", active.is_number() && active.as_number() == static_cast<double>(i)}});
        }
        return Value(out);
    };
    h["get_url"] = [](const Value::Object&, const Value&, ComponentContext& ctx) { return Value(active_url(ctx)); };
    h["read_text"] = [site](const Value::Object&, const Value& in, ComponentContext& ctx) {
        if (in.is_object() && in.find("id")) return Value(text_of(element(*site, ctx, string_arg(in, "id")), "text"));
        return Value(text_of(site->page(active_url(ctx)), "text"));
    };
    h["read_links"] = [site](const Value::Object&, const Value&, ComponentContext& ctx) {
        Value::Array out;
        for (const auto& e : list_of(site->page(active_url(ctx)), "elements")) {
            if (text_of(e, "type") != "link") continue;
            out.push_back(Value::Object{{"id", text_of(e, "id")}, {"text", text_of(e, "text")},
                                        {"href", text_of(e, "href")}});
        }
        return Value(out);
    };
    h["find_element"] = [site](const Value::Object&, const Value& in, ComponentContext& ctx) {
        const auto& els = list_of(site->page(active_url(ctx)), "elements");
        if (in.is_object() && in.find("text")) {
            std::string needle = string_arg(in, "text", false);
            for (const auto& e : els) {
                if (text_of(e, "text").find(needle) != std::string::npos) return e;
            }
            return Value();
        }
        std::string id = string_arg(in, "id");
        for (const auto& e : els) {
            if (text_of(e, "id") == id) return e;
        }
        return Value();
    };
    h["extract_table"] = [site](const Value::Object&, const Value& in, ComponentContext& ctx) {
        const auto& tables = list_of(site->page(active_url(ctx)), "tables");
        std::string id = in.is_object() && in.find("id") ? string_arg(in, "id") : in.is_string() ? in.as_string() : "";
        for (const auto& t : tables) {
            if (id.empty() || text_of(t, "id") == id) {
                return Value(Value::Object{{"id", text_of(t, "id")},
                                           {"columns", t.find("columns") ? *t.find("columns") : Value::Array{}},
                                           {"rows", t.find("rows") ? *t.find("rows") : Value::Array{}}});
            }
        }
        fail(id.empty() ? "no table on " + active_url(ctx) : "no table '" + id + "' on " + active_url(ctx));
    };
    h["click"] = [site](const Value::Object&, const Value& in, ComponentContext& ctx) {
        std::string id = string_arg(in, "id");
        const Value& e = element(*site, ctx, id);
        if (!text_of(e, "href").empty()) {
            navigate(*site, ctx, text_of(e, "href"));
            return page_object(*site, ctx);
        }
        if (!text_of(e, "form").empty()) return submit(*site, ctx, text_of(e, "form"));
        return Value(Value::Object{{"clicked", id}});
    };
    h["fill_input"] = [site](const Value::Object&, const Value& in, ComponentContext& ctx) {
        std::string id = string_arg(in, "id", false);
        const Value& value = arg(in, "value", false);
        const Value& e = element(*site, ctx, id);
        if (text_of(e, "type") != "input") fail("element '" + id + "' is not an input");
        active_tab(ctx)["inputs"].as_object()[id] = value;
        return Value(Value::Object{{"id", id}, {"value", value}});
    };
    h["submit_form"] = [site](const Value::Object&, const Value& in, ComponentContext& ctx) {
        return submit(*site, ctx, string_arg(in, "id"));
    };
    h["select_option"] = [site](const Value::Object&, const Value& in, ComponentContext& ctx) {
        std::string id = string_arg(in, "id", false);
        std::string value = string_arg(in, "value", false);
        const Value& e = element(*site, ctx, id);
        if (text_of(e, "type") != "select") fail("element '" + id + "' is not a select");
        bool offered = false;
        for (const auto& o : list_of(e, "options")) offered = offered || (o.is_string() && o.as_string() == value);
        if (!offered) fail("option '" + value + "' not offered by '" + id + "'");
        active_tab(ctx)["inputs"].as_object()[id] = value;
        return Value(Value::Object{{"id", id}, {"value", value}});
    };
    h["scroll"] = [](const Value::Object&, const Value& in, ComponentContext& ctx) {
        auto& tab = active_tab(ctx);
        double pos = tab["scroll"].as_number() + static_cast<double>(int_arg(in, "by", 1));
        tab["scroll"] = pos < 0 ? 0.0 : pos;
        return Value(Value::Object{{"scroll", tab["scroll"]}});
    };
    h["history_back"] = [site](const Value::Object&, const Value&, ComponentContext& ctx) {
        return history_move(*site, ctx, true);
    };
    h["history_forward"] = [site](const Value::Object&, const Value&, ComponentContext& ctx) {
        return history_move(*site, ctx, false);
    };
    h["wait_ticks"] = [](const Value::Object&, const Value& in, ComponentContext& ctx) {
        long long n = int_arg(in, "ticks", 1);
        if (n < 0) fail("ticks must be non-negative");
        auto& st = state(ctx);
        st["ticks"] = st["ticks"].as_number() + static_cast<double>(n);
        return Value(Value::Object{{"ticks", st["ticks"]}});
    };
    h["set_header"] = [](const Value::Object&, const Value& in, ComponentContext& ctx) {
        std::string name = string_arg(in, "name", false);
        std::string value = string_arg(in, "value", false);
        auto& headers = state(ctx)["headers"];
        headers.as_object()[name] = value;
        return Value(Value::Object{{"headers", headers}});
    };
    h["download_text"] = [site](const Value::Object&, const Value& in, ComponentContext& ctx) {
        std::string name = string_arg(in, "name");
        const Value* d = site->page(active_url(ctx)).find("downloads");
        const Value* t = d ? d->find(name) : nullptr;
        if (!t || !t->is_string()) fail("no download '" + name + "' on " + active_url(ctx));
        return *t;
    };
    h["eval_selector"] = [site](const Value::Object&, const Value& in, ComponentContext& ctx) {
        std::string sel = string_arg(in, "selector");
        Value::Array out;
        for (const auto& e : list_of(site->page(active_url(ctx)), "elements")) {
            bool hit = sel == "*" || (sel.size() > 1 && sel[0] == '#' && text_of(e, "id") == sel.substr(1)) ||
                       text_of(e, "type") == sel;
            if (hit) out.push_back(e);
        }
        return Value(out);
    };
    return h;
}

}  // namespace aad::plugins
