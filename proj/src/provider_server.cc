/*
 * Copyright 2026 The Trapkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "trapkit/provider_server.h"

#include <functional>

#include "httplib.h"
#include "json.hpp"
#include "trapkit/error.h"

namespace trapkit {

using nlohmann::json;

namespace {

std::vector<TokenId> ReadIds(const json& body, const char* field) {
  if (!body.contains(field) || !body[field].is_array()) {
    throw InputError(std::string("missing array field '") + field + "'");
  }
  std::vector<TokenId> ids;
  for (const auto& v : body[field]) {
    if (!v.is_number_integer() || v.get<int64_t>() < 0 ||
        v.get<int64_t>() > static_cast<int64_t>(UINT32_MAX)) {
      throw InputError(std::string("'") + field +
                       "' must hold non-negative integers");
    }
    ids.push_back(v.get<TokenId>());
  }
  return ids;
}

template <typename T>
T ReadNumber(const json& body, const char* field) {
  if (!body.contains(field) || !body[field].is_number()) {
    throw InputError(std::string("missing numeric field '") + field + "'");
  }
  return body[field].get<T>();
}

void Reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace),
                  "application/json");
}

using Handler = std::function<json(const json&)>;

httplib::Server::Handler Wrap(Handler handler) {
  return [handler = std::move(handler)](const httplib::Request& req,
                                        httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      Reply(res, 400, {{"error", "request body must be a JSON object"}});
      return;
    }
    try {
      Reply(res, 200, handler(body));
    } catch (const Error& e) {
      Reply(res, e.code() == ErrorCode::kInput ? 400 : 500,
            {{"error", e.what()}});
    } catch (const json::exception& e) {
      Reply(res, 400, {{"error", e.what()}});
    } catch (const std::exception& e) {
      Reply(res, 500, {{"error", e.what()}});
    }
  };
}

}  // namespace

ProviderServer::ProviderServer(const Provider& provider)
    : provider_(provider), server_(std::make_unique<httplib::Server>()) {
  server_->Post("/v1/tokenize", Wrap([this](const json& body) {
                  if (!body.contains("text") || !body["text"].is_string()) {
                    throw InputError("missing string field 'text'");
                  }
                  TokenSequence seq =
                      provider_.Tokenize(body["text"].get<std::string>());
                  return json{{"ids", seq.ids},
                              {"provider_id", seq.provider_id}};
                }));
  server_->Post("/v1/logprobs", Wrap([this](const json& body) {
                  TokenSequence tokens{ReadIds(body, "ids"), provider_.id()};
                  TokenSequence context{{}, provider_.id()};
                  if (body.contains("context_ids")) {
                    context.ids = ReadIds(body, "context_ids");
                  }
                  return json{
                      {"logprobs", provider_.Score(tokens, context).logprobs}};
                }));
  server_->Post("/v1/sample", Wrap([this](const json& body) {
                  SamplingParams params;
                  params.max_new = ReadNumber<size_t>(body, "max_new");
                  params.top_k = ReadNumber<size_t>(body, "top_k");
                  params.temperature = ReadNumber<double>(body, "temperature");
                  params.seed = ReadNumber<uint64_t>(body, "seed");
                  TokenSequence prompt{ReadIds(body, "prompt_ids"),
                                       provider_.id()};
                  Generation g = provider_.Sample(prompt, params);
                  return json{{"ids", g.tokens.ids}, {"text", g.text}};
                }));
}

ProviderServer::~ProviderServer() { Stop(); }

int ProviderServer::Start(const std::string& host, int port) {
  host_ = host;
  port_ = port == 0 ? server_->bind_to_any_port(host)
                    : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ < 0) {
    throw Error(ErrorCode::kTransport,
                "cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void ProviderServer::Stop() {
  if (thread_.joinable()) {
    server_->stop();
    thread_.join();
  }
}

std::string ProviderServer::endpoint() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

}  // namespace trapkit
