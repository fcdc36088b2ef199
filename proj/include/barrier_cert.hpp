#pragma once

#include "barrier_cert/arrangement.hpp"
#include "barrier_cert/box.hpp"
#include "barrier_cert/certify.hpp"
#include "barrier_cert/crown.hpp"
#include "barrier_cert/flip_set.hpp"
#include "barrier_cert/io.hpp"
#include "barrier_cert/lp.hpp"
#include "barrier_cert/nn.hpp"
#include "barrier_cert/partition.hpp"
#include "barrier_cert/sublevel.hpp"
