// Copyright 2026 prft-sim contributors.
// Licensed under the Apache License, Version 2.0 (see LICENSE).
#pragma once

// Umbrella header: the whole library in dependency order.

#include "prft/core.hpp"       // ids, digests, blocks, encoding
#include "prft/crypto.hpp"     // simulated signatures and the key registry
#include "prft/pof.hpp"        // signature tables, fraud proofs, deposits
#include "prft/messages.hpp"   // wire messages, envelopes, serialization
#include "prft/config.hpp"     // scenario configuration
#include "prft/trace.hpp"      // run traces and their JSONL form
#include "prft/engine.hpp"     // the replica state machine
#include "prft/adversary.hpp"  // strategy controller
#include "prft/netsim.hpp"     // discrete-event network
#include "prft/gametheory.hpp" // payoffs, utilities, equilibrium analyses
#include "prft/harness.hpp"    // robustness checks, metrics, reporting
