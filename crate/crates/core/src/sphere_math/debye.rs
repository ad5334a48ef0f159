//! Coefficients of the Debye polynomials `U_k(p)` used by the uniform
//! asymptotic expansion of `I_nu(nu z)`.
//!
//! `U_k(p) = p^k * sum_j DEBYE_U[k][j] * p^(2j)`. The rational coefficients were
//! produced exactly from the recurrence
//! `U_{k+1} = p^2 (1 - p^2) U_k' / 2 + (1/8) int_0^p (1 - 5 t^2) U_k(t) dt`
//! and rounded once to binary64.

pub(super) const DEBYE_U: [&[f64]; 17] = [
    &[1.0],
    &[0.125, -0.20833333333333334],
    &[0.0703125, -0.4010416666666667, 0.3342013888888889],
    &[0.0732421875, -0.8912109375, 1.8464626736111112, -1.0258125964506173],
    &[0.112152099609375, -2.3640869140625, 8.78912353515625, -11.207002616222994, 4.669584423426247],
    &[0.22710800170898438, -7.368794359479632, 42.53499874538846, -91.81824154324002, 84.63621767460073, -28.212072558200244],
    &[0.5725014209747314, -26.491430486951554, 218.1905117442116, -699.5796273761325, 1059.9904525279999, -765.2524681411817, 212.57013003921713],
    &[1.7277275025844574, -108.09091978839466, 1200.9029132163525, -5305.646978613403, 11655.393336864534, -13586.550006434138, 8061.722181737309, -1919.457662318407],
    &[6.074042001273483, -493.915304773088, 7109.514302489364, -41192.65496889755, 122200.46498301746, -203400.17728041555, 192547.00123253153, -96980.59838863752, 20204.29133096615],
    &[24.380529699556064, -2499.8304818112097, 45218.76898136273, -331645.1724845636, 1268365.2733216248, -2813563.226586534, 3763271.297656404, -2998015.9185381066, 1311763.6146629772, -242919.18790055133],
    &[110.01714026924674, -13886.08975371704, 308186.4046126624, -2785618.1280864547, 13288767.166421818, -37567176.66076335, 66344512.27472903, -74105148.21153265, 50952602.49266464, -19706819.118432228, 3284469.853072038],
    &[551.3358961220206, -84005.43360302408, 2243768.1779224495, -24474062.72573873, 142062907.7975331, -495889784.2750303, 1106842816.8230145, -1621080552.1083372, 1553596899.57058, -939462359.6815784, 325573074.18576574, -49329253.66450996],
    &[3038.090510922384, -549842.3275722887, 17395107.553978164, -225105661.88941526, 1559279864.8792574, -6563293792.619285, 17954213731.1556, -33026599749.800724, 41280185579.753975, -34632043388.158775, 18688207509.295826, -5866481492.051847, 814789096.1183121],
    &[18257.755474293175, -3871833.442572613, 143157876.71888897, -2167164983.223795, 17634730606.83497, -87867072178.02327, 287900649906.1506, -645364869245.3765, 1008158106865.3821, -1098375156081.2233, 819218669548.5773, -399096175224.4665, 114498237732.0258, -14679261247.695616],
    &[118838.42625678325, -29188388.122220814, 1247009293.5127103, -21822927757.529224, 205914503232.41, -1196552880196.1816, 4612725780849.132, -12320491305598.287, 23348364044581.84, -31667088584785.16, 30565125519935.32, -20516899410934.438, 9109341185239.898, -2406297900028.504, 286464035717.679],
    &[832859.3040162893, -234557963.52225152, 11465754899.448236, -229619372968.24646, 2485000928034.0854, -16634824724892.48, 74373122908679.14, -232604831188939.94, 523054882578444.6, -857461032982895.0, 1026955196082762.5, -889496939881026.5, 542739664987659.75, -221349638702525.2, 54177510755106.05, -6019723417234.006],
    &[6252951.493434797, -2001646928.1917763, 110997405139.17902, -2521558474912.8545, 31007436472896.46, -236652530451649.25, 1212675804250347.5, -4379325838364015.5, 1.1486706978449752e+16, -2.2268225133911144e+16, 3.213827526858624e+16, -3.4447226006485144e+16, 2.705471130619708e+16, -1.5129826322457682e+16, 5705782159023671.0, -1301012723549699.5, 135522158703093.69],
];
