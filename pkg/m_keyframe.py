# m_keyframe.py
from stream_pipeline.data_package import DataPackage, DataPackageController, DataPackagePhase, DataPackageModule, Status
from stream_pipeline.module_classes import ExecutionModule, ModuleOptions

from backend import BackendSession
from errors import RadarBAError
import data
import logger

log = logger.get_logger()

class Keyframe_Selection(ExecutionModule):
    """Promotes a frame to a keyframe or records its pose against the latest keyframe and stops it."""
    def __init__(self,
                    session: BackendSession,
                    timeout: float = 60.0
                ) -> None:
        super().__init__(ModuleOptions(
                                use_mutex=False,
                                timeout=timeout,
                            ),
                            name="Keyframe-Module"
                        )
        self.session: BackendSession = session

    def execute(self, dp: DataPackage[data.RadarData], dpc: DataPackageController, dpp: DataPackagePhase, dpm: DataPackageModule) -> None:
        if not dp.data:
            raise Exception("No data found")
        if dp.data.predicted_pose is None:
            raise Exception("No predicted pose found")

        if not self.session.is_keyframe(dp.data):
            self.session.record_frame(dp.data)
            dpm.message = "Not a keyframe"
            dpm.status = Status.EXIT
            return

        try:
            self.session.add_keyframe(dp.data)
        except RadarBAError as e:
            dp.data.error = e
            dpm.message = f"Keyframe creation failed on frame {dp.data.frame.frame_id}: {e}"
            dpm.status = Status.EXIT
