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

#ifndef TRAPKIT_PROVIDER_SERVER_H_
#define TRAPKIT_PROVIDER_SERVER_H_

#include <memory>
#include <string>
#include <thread>

#include "trapkit/provider.h"

namespace httplib {
class Server;
}

namespace trapkit {

// Serves any Provider over the HTTP provider protocol (see
// remote_provider.h). Used for conformance testing and to expose a builtin
// model to other tools. The provider must outlive the server.
class ProviderServer {
 public:
  explicit ProviderServer(const Provider& provider);
  ~ProviderServer();

  ProviderServer(const ProviderServer&) = delete;
  ProviderServer& operator=(const ProviderServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port.
  int Start(const std::string& host = "127.0.0.1", int port = 0);
  void Stop();

  std::string endpoint() const;

 private:
  const Provider& provider_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = -1;
};

}  // namespace trapkit

#endif  // TRAPKIT_PROVIDER_SERVER_H_
