#pragma once

#include "sshred/core/crc32.hpp"
#include "sshred/core/error.hpp"
#include "sshred/core/parallel.hpp"
#include "sshred/core/rng.hpp"
#include "sshred/data/field.hpp"
#include "sshred/data/field_io.hpp"
#include "sshred/data/generators.hpp"
#include "sshred/data/sensors.hpp"
#include "sshred/data/windows.hpp"
#include "sshred/diff/gradcheck.hpp"
#include "sshred/diff/optim.hpp"
#include "sshred/diff/tensor.hpp"
#include "sshred/diff/var.hpp"
#include "sshred/eval/forecast.hpp"
#include "sshred/eval/landscape.hpp"
#include "sshred/eval/scaling.hpp"
#include "sshred/eval/sine.hpp"
#include "sshred/nets/decoder.hpp"
#include "sshred/nets/gru.hpp"
#include "sshred/shred/checkpoint.hpp"
#include "sshred/shred/config.hpp"
#include "sshred/shred/loss.hpp"
#include "sshred/shred/model.hpp"
#include "sshred/shred/select.hpp"
#include "sshred/shred/train.hpp"
#include "sshred/sindy/analysis.hpp"
#include "sshred/sindy/cell.hpp"
#include "sshred/sindy/io.hpp"
#include "sshred/sindy/koopman.hpp"
#include "sshred/sindy/library.hpp"
#include "sshred/sindy/model.hpp"
#include "sshred/sindy/refit.hpp"
#include "sshred/sindy/stlsq.hpp"
