#pragma once

#define ELWQR_VERSION "0.1.0"
