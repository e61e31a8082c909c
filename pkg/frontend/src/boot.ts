/** Browser entry point: wire the composer to the same-origin service. */

import { ApiClient } from './api.js';
import { initComposer } from './main.js';

initComposer(document, new ApiClient());
